//! Basic objective functions.
//!
//! Every function is written in a frame where its global minimizer sits at
//! the origin, so `f(0)` is the optimum value. Functions whose literature
//! optimum lies elsewhere are translated accordingly.

use std::f64::consts::{E, PI};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BasicFunction {
    Sphere,
    SchwefelF12,
    Ellipsoidal,
    EllipsoidalHighCondition,
    BentCigar,
    Discus,
    DifferentPowers,
    Rosenbrock,
    Ackley,
    Weierstrass,
    Griewank,
    Rastrigin,
    BucheRastrigin,
    ModifiedSchwefel,
    Katsuura,
    GriewankRosenbrock,
    ExpandedSchafferF6,
    HappyCat,
    HgBat,
    LunacekBiRastrigin,
    Zakharov,
    Levy,
    SchafferF7,
    StepRastrigin,
    LinearSlope,
    AttractiveSector,
    StepEllipsoidal,
    SharpRidge,
    RastriginF15,
    Schwefel,
    Gallagher101,
    Gallagher21,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modality {
    Unimodal,
    Multimodal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GlobalStructure {
    Adequate,
    Weak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Conditioning {
    Low,
    High,
}

use BasicFunction::*;
use Conditioning::{High, Low};
use GlobalStructure::{Adequate, Weak};
use Modality::{Multimodal, Unimodal};

pub const ALL_FUNCTIONS: [BasicFunction; 32] = [
    Sphere, SchwefelF12, Ellipsoidal, EllipsoidalHighCondition, BentCigar, Discus,
    DifferentPowers, Rosenbrock, Ackley, Weierstrass, Griewank, Rastrigin, BucheRastrigin,
    ModifiedSchwefel, Katsuura, GriewankRosenbrock, ExpandedSchafferF6, HappyCat, HgBat,
    LunacekBiRastrigin, Zakharov, Levy, SchafferF7, StepRastrigin, LinearSlope,
    AttractiveSector, StepEllipsoidal, SharpRidge, RastriginF15, Schwefel, Gallagher101,
    Gallagher21,
];

const SCHWEFEL_ROOT: f64 = 420.968_746_227_503_6;

impl BasicFunction {
    /// One-based index in the function table.
    pub fn index(self) -> usize {
        ALL_FUNCTIONS.iter().position(|&f| f == self).unwrap() + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            Sphere => "Sphere",
            SchwefelF12 => "Schwefel F12",
            Ellipsoidal => "Ellipsoidal",
            EllipsoidalHighCondition => "Ellipsoidal high condition",
            BentCigar => "Bent cigar",
            Discus => "Discus",
            DifferentPowers => "Different Powers",
            Rosenbrock => "Rosenbrock",
            Ackley => "Ackley",
            Weierstrass => "Weierstrass",
            Griewank => "Griewank",
            Rastrigin => "Rastrigin",
            BucheRastrigin => "Buche-Rastrigin",
            ModifiedSchwefel => "Modified Schwefel",
            Katsuura => "Katsuura",
            GriewankRosenbrock => "Composite Griewank-Rosenbrock F8F2",
            ExpandedSchafferF6 => "Escaffer's F6",
            HappyCat => "Happycat",
            HgBat => "Hgbat",
            LunacekBiRastrigin => "Lunacek bi-Rastrigin",
            Zakharov => "Zakharov",
            Levy => "Levy",
            SchafferF7 => "Scaffer's F7",
            StepRastrigin => "Step-Rastrigin",
            LinearSlope => "Linear Slope",
            AttractiveSector => "Attractive Sector",
            StepEllipsoidal => "Step-Ellipsoidal",
            SharpRidge => "Sharp Ridge",
            RastriginF15 => "Rastrigin's F15",
            Schwefel => "Schwefel",
            Gallagher101 => "Gallagher's Gaussian 101-me Peaks",
            Gallagher21 => "Gallagher's Gaussian 21-hi Peaks",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        ALL_FUNCTIONS.iter().copied().find(|f| f.name() == name)
    }

    pub fn tags(self) -> (Modality, GlobalStructure, Conditioning) {
        match self {
            Sphere | SchwefelF12 | Ellipsoidal | Rosenbrock | GriewankRosenbrock | Zakharov
            | LinearSlope | HgBat => (Unimodal, Adequate, Low),
            EllipsoidalHighCondition | BentCigar | Discus | DifferentPowers | BucheRastrigin
            | AttractiveSector | SharpRidge => (Unimodal, Adequate, High),
            Ackley | ExpandedSchafferF6 => (Multimodal, Adequate, High),
            Weierstrass | Rastrigin | ModifiedSchwefel | Katsuura | LunacekBiRastrigin | Levy => {
                (Multimodal, Weak, High)
            }
            Griewank | HappyCat | SchafferF7 | StepRastrigin | StepEllipsoidal | Schwefel
            | Gallagher101 | Gallagher21 => (Multimodal, Weak, Low),
            RastriginF15 => (Unimodal, Weak, Low),
        }
    }

    /// False when the optimum value is only known to the precision of a
    /// tabulated minimizer.
    pub fn optimum_exact(self) -> bool {
        !matches!(self, ModifiedSchwefel | Schwefel)
    }

    pub fn needs_peaks(self) -> bool {
        matches!(self, Gallagher101 | Gallagher21)
    }
}

/// Peak layout of a Gallagher function in a given dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Peaks {
    /// Row-major `count × dim` peak locations; the first is the origin.
    pub centers: Vec<f64>,
    /// Row-major `count × dim` diagonal precision entries.
    pub scales: Vec<f64>,
    pub heights: Vec<f64>,
    pub dim: usize,
}

impl Peaks {
    /// Fixed layout for `(function, dim)`; identical on every call.
    pub fn new(f: BasicFunction, dim: usize) -> Self {
        let (count, spread, top_alpha) = match f {
            Gallagher101 => (101usize, 4.9, 1000.0f64),
            Gallagher21 => (21, 3.92, 1000.0 * 1000.0),
            _ => panic!("{} has no peaks", f.name()),
        };
        let mut rng = Rng::seed_from_u64(0x6a11_a6e7 ^ ((count as u64) << 32) ^ dim as u64);
        let mut centers = vec![0.0; count * dim];
        for c in centers.iter_mut().skip(dim) {
            *c = rng.random_range(-spread..spread);
        }
        let mut alphas: Vec<f64> = (0..count - 1)
            .map(|j| 1000f64.powf(2.0 * j as f64 / (count - 2) as f64))
            .collect();
        alphas.shuffle(&mut rng);
        alphas.insert(0, top_alpha);
        let mut scales = vec![0.0; count * dim];
        for (p, &a) in alphas.iter().enumerate() {
            let mut exps: Vec<f64> = (0..dim)
                .map(|i| if dim > 1 { 0.5 * i as f64 / (dim - 1) as f64 } else { 0.5 })
                .collect();
            exps.shuffle(&mut rng);
            for i in 0..dim {
                scales[p * dim + i] = a.powf(exps[i]) / a.powf(0.25);
            }
        }
        let heights = (0..count)
            .map(|p| if p == 0 { 10.0 } else { 1.1 + 8.0 * (p - 1) as f64 / (count - 2) as f64 })
            .collect();
        Peaks { centers, scales, heights, dim }
    }
}

/// Per-dimension exponent ramp `i / (D - 1)`, zero for a single dimension.
#[inline]
fn ramp(i: usize, d: usize) -> f64 {
    if d > 1 {
        i as f64 / (d - 1) as f64
    } else {
        0.0
    }
}

/// Consecutive pairs `(z_i, z_{i+1})`; a single coordinate pairs with itself.
fn pairs(z: &[f64]) -> impl Iterator<Item = (f64, f64)> + '_ {
    let n = if z.len() > 1 { z.len() - 1 } else { 1 };
    (0..n).map(move |i| (z[i], z[(i + 1).min(z.len() - 1)]))
}

/// Pairs with wrap-around from the last coordinate to the first.
fn cyclic_pairs(z: &[f64]) -> impl Iterator<Item = (f64, f64)> + '_ {
    (0..z.len()).map(move |i| (z[i], z[(i + 1) % z.len()]))
}

fn rastrigin(y: impl Iterator<Item = f64>) -> f64 {
    y.map(|v| v * v - 10.0 * (2.0 * PI * v).cos() + 10.0).sum()
}

fn rosen_pair(a: f64, b: f64) -> f64 {
    100.0 * (a * a - b).powi(2) + (a - 1.0).powi(2)
}

fn schwefel_term(u: f64, d: usize) -> f64 {
    if u.abs() <= 500.0 {
        u * u.abs().sqrt().sin()
    } else if u > 500.0 {
        let m = 500.0 - u.rem_euclid(500.0);
        m * m.abs().sqrt().sin() - (u - 500.0).powi(2) / (10_000.0 * d as f64)
    } else {
        let m = u.abs().rem_euclid(500.0) - 500.0;
        m * m.abs().sqrt().sin() - (u + 500.0).powi(2) / (10_000.0 * d as f64)
    }
}

/// Evaluates `f` at `z`. `peaks` must be supplied for the Gallagher pair.
pub fn evaluate(f: BasicFunction, z: &[f64], peaks: Option<&Arc<Peaks>>) -> f64 {
    let d = z.len();
    let df = d as f64;
    match f {
        Sphere => z.iter().map(|v| v * v).sum(),
        SchwefelF12 => {
            let mut acc = 0.0;
            let mut s = 0.0;
            for v in z {
                s += v;
                acc += s * s;
            }
            acc
        }
        Ellipsoidal => z.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v * v).sum(),
        EllipsoidalHighCondition => z
            .iter()
            .enumerate()
            .map(|(i, v)| 10f64.powf(6.0 * ramp(i, d)) * v * v)
            .sum(),
        BentCigar => z[0] * z[0] + 1e6 * z[1..].iter().map(|v| v * v).sum::<f64>(),
        Discus => 1e6 * z[0] * z[0] + z[1..].iter().map(|v| v * v).sum::<f64>(),
        DifferentPowers => z
            .iter()
            .enumerate()
            .map(|(i, v)| v.abs().powf(2.0 + 4.0 * ramp(i, d)))
            .sum::<f64>()
            .sqrt(),
        Rosenbrock => pairs(z).map(|(a, b)| rosen_pair(a + 1.0, b + 1.0)).sum(),
        Ackley => {
            let sq = z.iter().map(|v| v * v).sum::<f64>() / df;
            let cs = z.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / df;
            -20.0 * (-0.2 * sq.sqrt()).exp() - cs.exp() + 20.0 + E
        }
        Weierstrass => {
            const A: f64 = 0.5;
            const B: f64 = 3.0;
            const K: i32 = 20;
            let mut offset = 0.0;
            for k in 0..=K {
                offset += A.powi(k) * (PI * B.powi(k)).cos();
            }
            let mut acc = 0.0;
            for v in z {
                for k in 0..=K {
                    acc += A.powi(k) * (2.0 * PI * B.powi(k) * (v + 0.5)).cos();
                }
            }
            acc - df * offset
        }
        Griewank => {
            let s: f64 = z.iter().map(|v| v * v).sum::<f64>() / 4000.0;
            let p: f64 = z.iter().enumerate().map(|(i, v)| (v / ((i + 1) as f64).sqrt()).cos()).product();
            s - p + 1.0
        }
        Rastrigin => rastrigin(z.iter().copied()),
        BucheRastrigin => {
            let y = z.iter().enumerate().map(|(i, &v)| {
                let mut s = 10f64.powf(0.5 * ramp(i, d));
                if v > 0.0 && i % 2 == 0 {
                    s *= 10.0;
                }
                s * v
            });
            rastrigin(y)
        }
        ModifiedSchwefel => {
            let s: f64 = z.iter().map(|v| schwefel_term(10.0 * v + SCHWEFEL_ROOT, d)).sum();
            418.982_887_272_433_9 * df - s
        }
        Katsuura => {
            let scale = 10.0 / (df * df);
            let expo = 10.0 / df.powf(1.2);
            let mut prod = 1.0;
            for (i, v) in z.iter().enumerate() {
                let mut s = 0.0;
                for j in 1..=32 {
                    let p = 2f64.powi(j);
                    let t = p * v;
                    s += (t - t.round()).abs() / p;
                }
                prod *= (1.0 + (i + 1) as f64 * s).powf(expo);
            }
            scale * prod - scale
        }
        GriewankRosenbrock => cyclic_pairs(z)
            .map(|(a, b)| {
                let t = rosen_pair(a + 1.0, b + 1.0);
                t * t / 4000.0 - t.cos() + 1.0
            })
            .sum(),
        ExpandedSchafferF6 => cyclic_pairs(z)
            .map(|(a, b)| {
                let r2 = a * a + b * b;
                0.5 + (r2.sqrt().sin().powi(2) - 0.5) / (1.0 + 0.001 * r2).powi(2)
            })
            .sum(),
        HappyCat => {
            let y = z.iter().map(|v| v - 1.0);
            let r2: f64 = y.clone().map(|v| v * v).sum();
            let s: f64 = y.sum();
            (r2 - df).abs().powf(0.25) + (0.5 * r2 + s) / df + 0.5
        }
        HgBat => {
            let y = z.iter().map(|v| v - 1.0);
            let r2: f64 = y.clone().map(|v| v * v).sum();
            let s: f64 = y.sum();
            (r2 * r2 - s * s).abs().sqrt() + (0.5 * r2 + s) / df + 0.5
        }
        LunacekBiRastrigin => {
            const MU0: f64 = 2.5;
            let s = 1.0 - 1.0 / (2.0 * (df + 20.0).sqrt() - 8.2);
            let mu1 = -((MU0 * MU0 - 1.0) / s).sqrt();
            let a: f64 = z.iter().map(|v| v * v).sum();
            let b: f64 = z.iter().map(|v| (v + MU0 - mu1).powi(2)).sum();
            let c: f64 = z.iter().map(|v| (2.0 * PI * v).cos()).sum();
            a.min(df + s * b) + 10.0 * (df - c)
        }
        Zakharov => {
            let a: f64 = z.iter().map(|v| v * v).sum();
            let b: f64 = z.iter().enumerate().map(|(i, v)| 0.5 * (i + 1) as f64 * v).sum();
            a + b * b + b.powi(4)
        }
        Levy => {
            let w: Vec<f64> = z.iter().map(|v| 1.0 + v / 4.0).collect();
            let last = w[d - 1];
            let mut acc = (PI * w[0]).sin().powi(2);
            for &wi in &w[..d - 1] {
                acc += (wi - 1.0).powi(2) * (1.0 + 10.0 * (PI * wi + 1.0).sin().powi(2));
            }
            acc + (last - 1.0).powi(2) * (1.0 + (2.0 * PI * last).sin().powi(2))
        }
        SchafferF7 => {
            let n = pairs(z).count() as f64;
            let s: f64 = pairs(z)
                .map(|(a, b)| {
                    let si = (a * a + b * b).sqrt();
                    si.sqrt() * (1.0 + (50.0 * si.powf(0.2)).sin().powi(2))
                })
                .sum::<f64>()
                / n;
            s * s
        }
        StepRastrigin => rastrigin(
            z.iter().map(|&v| if v.abs() <= 0.5 { v } else { (2.0 * v).round() / 2.0 }),
        ),
        LinearSlope => z
            .iter()
            .enumerate()
            .map(|(i, v)| 10f64.powf(ramp(i, d)) * (-v).max(0.0))
            .sum(),
        AttractiveSector => {
            let s: f64 = z
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let u = 10f64.powf(0.5 * ramp(i, d)) * v;
                    let w = if u > 0.0 { 100.0 * u } else { u };
                    w * w
                })
                .sum();
            s.powf(0.9)
        }
        StepEllipsoidal => {
            let hat: Vec<f64> = z
                .iter()
                .enumerate()
                .map(|(i, v)| 10f64.powf(0.5 * ramp(i, d)) * v)
                .collect();
            let s: f64 = hat
                .iter()
                .enumerate()
                .map(|(i, &h)| {
                    let t = if h.abs() > 0.5 { h.round() } else { (10.0 * h).round() / 10.0 };
                    10f64.powf(2.0 * ramp(i, d)) * t * t
                })
                .sum();
            0.1 * (hat[0].abs() / 1e4).max(s)
        }
        SharpRidge => z[0] * z[0] + 100.0 * z[1..].iter().map(|v| v * v).sum::<f64>().sqrt(),
        RastriginF15 => {
            let y = z.iter().enumerate().map(|(i, &v)| {
                let a = if v > 0.0 { v.powf(1.0 + 0.2 * ramp(i, d) * v.sqrt()) } else { v };
                10f64.powf(0.5 * ramp(i, d)) * a
            });
            rastrigin(y)
        }
        Schwefel => {
            let mut pen = 0.0;
            let mut s = 0.0;
            for v in z {
                let u = 10.0 * v + SCHWEFEL_ROOT;
                s += u * u.abs().sqrt().sin();
                pen += (u.abs() / 100.0 - 5.0).max(0.0).powi(2);
            }
            -s / (100.0 * df) + 4.189_828_872_724_339 + 100.0 * pen
        }
        Gallagher101 | Gallagher21 => {
            let p = peaks.expect("Gallagher functions need a peak layout");
            assert_eq!(p.dim, d, "peak layout dimension mismatch");
            let mut best = 0.0f64;
            for (k, &h) in p.heights.iter().enumerate() {
                let c = &p.centers[k * d..(k + 1) * d];
                let sc = &p.scales[k * d..(k + 1) * d];
                let q: f64 = (0..d).map(|i| sc[i] * (z[i] - c[i]).powi(2)).sum();
                best = best.max(h * (-q / (2.0 * df)).exp());
            }
            (10.0 - best).powi(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(f: BasicFunction, z: &[f64]) -> f64 {
        let peaks = f.needs_peaks().then(|| Arc::new(Peaks::new(f, z.len())));
        evaluate(f, z, peaks.as_ref())
    }

    #[test]
    fn tags_follow_the_table() {
        let unimodal = ALL_FUNCTIONS.iter().filter(|f| f.tags().0 == Unimodal).count();
        let high = ALL_FUNCTIONS.iter().filter(|f| f.tags().2 == High).count();
        let weak = ALL_FUNCTIONS.iter().filter(|f| f.tags().1 == Weak).count();
        assert_eq!((unimodal, weak, high), (16, 15, 15));
        assert_eq!(Gallagher21.index(), 32);
        assert_eq!(BasicFunction::from_name("Levy"), Some(Levy));
    }

    #[test]
    fn origin_is_the_minimum() {
        let mut rng = Rng::seed_from_u64(7);
        for f in ALL_FUNCTIONS {
            for d in [1usize, 2, 5, 10, 20, 50] {
                let peaks = f.needs_peaks().then(|| Arc::new(Peaks::new(f, d)));
                let opt = evaluate(f, &vec![0.0; d], peaks.as_ref());
                assert!(opt.is_finite(), "{} at D={d}", f.name());
                if f.optimum_exact() {
                    assert!(opt.abs() < 1e-9, "{} at D={d}: {opt}", f.name());
                }
                for scale in [1e-3, 0.1, 1.0, 5.0, 50.0, 500.0] {
                    for _ in 0..40 {
                        let z: Vec<f64> = (0..d).map(|_| rng.random_range(-scale..scale)).collect();
                        let v = evaluate(f, &z, peaks.as_ref());
                        assert!(v.is_finite(), "{} not total at {z:?}", f.name());
                        assert!(v >= opt - 1e-9, "{} D={d}: f(z)={v} < f(0)={opt} at {z:?}", f.name());
                    }
                }
            }
        }
    }

    #[test]
    fn hand_values() {
        assert_eq!(eval(Sphere, &[1.0, 1.0]), 2.0);
        assert_eq!(eval(SchwefelF12, &[1.0, 2.0]), 1.0 + 9.0);
        assert_eq!(eval(Ellipsoidal, &[1.0, 1.0]), 3.0);
        assert_eq!(eval(BentCigar, &[1.0, 1.0]), 1e6 + 1.0);
        assert_eq!(eval(Discus, &[1.0, 1.0]), 1e6 + 1.0);
        assert_eq!(eval(SharpRidge, &[1.0, 3.0, 4.0]), 501.0);
        assert!((eval(Rastrigin, &[1.0, 0.0]) - 1.0).abs() < 1e-12);
        assert!((eval(Rastrigin, &[0.5]) - 20.25).abs() < 1e-12);
        // Rosenbrock in the shifted frame: z = x - 1
        assert!((eval(Rosenbrock, &[-1.0, -1.0]) - 1.0).abs() < 1e-12);
        assert!((eval(Zakharov, &[1.0, 1.0]) - (2.0 + 2.25 + 1.5f64.powi(4))).abs() < 1e-12);
        assert!((eval(Griewank, &[PI * 0.0, 0.0])).abs() < 1e-15);
        assert_eq!(eval(LinearSlope, &[1.0, -1.0]), 10.0);
    }

    #[test]
    fn schwefel_variants_are_near_zero_at_origin() {
        for d in [2usize, 10] {
            let a = eval(ModifiedSchwefel, &vec![0.0; d]);
            let b = eval(Schwefel, &vec![0.0; d]);
            assert!(a.abs() < 1e-6 * d as f64, "{a}");
            assert!(b.abs() < 1e-6, "{b}");
        }
    }

    #[test]
    fn peaks_are_deterministic() {
        let a = Peaks::new(Gallagher101, 5);
        let b = Peaks::new(Gallagher101, 5);
        assert_eq!(a, b);
        assert_eq!(a.heights.len(), 101);
        assert_eq!(Peaks::new(Gallagher21, 3).heights.len(), 21);
        assert!(a.centers[..5].iter().all(|&c| c == 0.0));
    }
}
