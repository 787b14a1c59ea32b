//! Landscape features of a problem from a uniform sample.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::engine::ops::dist;
use crate::problem::ProblemInstance;
use crate::rng::{self, tag, Rng};

pub const ELA_DIM: usize = 9;
pub const PROBLEM_FEATURE_DIM: usize = 4 + ELA_DIM;

pub const ELA_NAMES: [&str; ELA_DIM] = [
    "ela_meta.lin_simple.intercept",
    "ela_meta.quad_simple.adj_r2",
    "ela_meta.lin_w_interact.adj_r2",
    "ic.m0",
    "ic.h_max",
    "ic.eps_ratio",
    "nbc.nn_nb.mean_ratio",
    "nbc.dist_ratio.coeff_var",
    "ela_distr.number_of_peaks",
];

pub const BASIC_NAMES: [&str; 4] = ["dim", "max_fes", "ub", "lb"];

/// Sample points per dimension.
pub const SAMPLES_PER_DIM: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFeatures {
    pub values: Vec<f64>,
    pub sample_size: usize,
    pub seed: u64,
}

impl ProblemFeatures {
    pub fn names() -> Vec<&'static str> {
        BASIC_NAMES.iter().chain(ELA_NAMES.iter()).copied().collect()
    }

    /// Named entries in feature order.
    pub fn named(&self) -> Vec<(&'static str, f64)> {
        Self::names().into_iter().zip(self.values.iter().copied()).collect()
    }
}

/// Least-squares fit; returns coefficients and R². Constant targets give
/// R² = 0.
struct Fit {
    coef: DVector<f64>,
    r2: f64,
}

fn least_squares(design: &DMatrix<f64>, y: &DVector<f64>) -> Fit {
    let gram = design.transpose() * design;
    let rhs = design.transpose() * y;
    let coef = match gram.clone().cholesky() {
        Some(c) => c.solve(&rhs),
        None => {
            let p = gram.nrows();
            let ridged = gram + DMatrix::identity(p, p) * 1e-6;
            match ridged.clone().cholesky() {
                Some(c) => c.solve(&rhs),
                None => ridged.lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(p)),
            }
        }
    };
    let mean = y.mean();
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let resid = y - design * &coef;
    let sse: f64 = resid.iter().map(|v| v * v).sum();
    let r2 = if sst < 1e-24 { 0.0 } else { 1.0 - sse / sst };
    Fit { coef, r2 }
}

/// Adjusted R² with `p` predictors besides the intercept.
fn adjusted_r2(r2: f64, n: usize, p: usize) -> f64 {
    if n <= p + 1 {
        return r2;
    }
    1.0 - (1.0 - r2) * (n - 1) as f64 / (n - p - 1) as f64
}

fn design(x: &[Vec<f64>], squares: bool, interactions: bool) -> DMatrix<f64> {
    let d = x[0].len();
    let mut cols = 1 + d;
    if squares {
        cols += d;
    }
    if interactions {
        cols += d * (d - 1) / 2;
    }
    DMatrix::from_fn(x.len(), cols, |i, c| {
        let row = &x[i];
        if c == 0 {
            return 1.0;
        }
        let mut k = c - 1;
        if k < d {
            return row[k];
        }
        k -= d;
        if squares {
            if k < d {
                return row[k] * row[k];
            }
            k -= d;
        }
        // k-th pair (a, b) with a < b in row-major order
        let mut a = 0;
        let mut left = k;
        while left >= d - 1 - a {
            left -= d - 1 - a;
            a += 1;
        }
        let b = a + 1 + left;
        row[a] * row[b]
    })
}

/// Meta-model features: linear intercept, quadratic adj R², interaction adj R².
pub fn meta_model(x: &[Vec<f64>], y: &[f64]) -> [f64; 3] {
    let n = x.len();
    let d = x[0].len();
    let yv = DVector::from_column_slice(y);
    let lin = least_squares(&design(x, false, false), &yv);
    let quad = least_squares(&design(x, true, false), &yv);
    let inter = least_squares(&design(x, false, true), &yv);
    let constant = {
        let m = yv.mean();
        y.iter().all(|v| (v - m).abs() < 1e-12)
    };
    let intercept = if constant { yv.mean() } else { lin.coef[0] };
    let adj = |fit: &Fit, p: usize| if constant { 0.0 } else { adjusted_r2(fit.r2, n, p) };
    [intercept, adj(&quad, 2 * d), adj(&inter, d + d * (d - 1) / 2)]
}

/// Greedy nearest-neighbour tour starting at `start`.
fn tour(x: &[Vec<f64>], start: usize) -> Vec<usize> {
    let n = x.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut cur = start;
    visited[cur] = true;
    order.push(cur);
    for _ in 1..n {
        let mut best = usize::MAX;
        let mut bd = f64::INFINITY;
        for j in 0..n {
            if !visited[j] {
                let dj = dist(&x[cur], &x[j]);
                if dj < bd {
                    bd = dj;
                    best = j;
                }
            }
        }
        visited[best] = true;
        order.push(best);
        cur = best;
    }
    order
}

fn symbols(diffs: &[f64], eps: f64) -> Vec<i8> {
    diffs
        .iter()
        .map(|&v| if v < -eps { -1 } else if v > eps { 1 } else { 0 })
        .collect()
}

/// Entropy of consecutive unequal symbol pairs, base 6.
fn information_content(s: &[i8]) -> f64 {
    if s.len() < 2 {
        return 0.0;
    }
    let mut counts = [[0usize; 3]; 3];
    for w in s.windows(2) {
        if w[0] != w[1] {
            counts[(w[0] + 1) as usize][(w[1] + 1) as usize] += 1;
        }
    }
    let total = (s.len() - 1) as f64;
    let mut h = 0.0;
    for row in counts {
        for c in row {
            if c > 0 {
                let p = c as f64 / total;
                h -= p * p.ln() / 6f64.ln();
            }
        }
    }
    h
}

/// Length of the alternating slope sequence relative to the series length.
fn partial_information(s: &[i8]) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    let mut last = 0i8;
    let mut mu = 0usize;
    for &v in s {
        if v != 0 && v != last {
            mu += 1;
            last = v;
        }
    }
    mu as f64 / s.len() as f64
}

/// Logarithmic epsilon grid, in multiples of the median absolute step.
const EPS_LOG_LO: f64 = -6.0;
const EPS_LOG_HI: f64 = 2.0;
const EPS_STEPS: usize = 161;

/// `[m0, h_max, eps_ratio]` along a nearest-neighbour tour.
pub fn information_features(x: &[Vec<f64>], y: &[f64], start: usize) -> [f64; 3] {
    let order = tour(x, start);
    let diffs: Vec<f64> = order.windows(2).map(|w| y[w[1]] - y[w[0]]).collect();
    let mut abs: Vec<f64> = diffs.iter().map(|v| v.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let median = if abs.is_empty() { 0.0 } else { abs[abs.len() / 2] };
    let base = if median > 0.0 { median } else { 1.0 };
    let s0 = symbols(&diffs, 0.0);
    let m0 = partial_information(&s0);
    let mut h_max = information_content(&s0);
    let mut eps_ratio = None;
    if m0 == 0.0 {
        eps_ratio = Some(EPS_LOG_LO + base.log10());
    }
    for k in 0..EPS_STEPS {
        let le = EPS_LOG_LO + (EPS_LOG_HI - EPS_LOG_LO) * k as f64 / (EPS_STEPS - 1) as f64;
        let eps = 10f64.powf(le) * base;
        let s = symbols(&diffs, eps);
        h_max = h_max.max(information_content(&s));
        if eps_ratio.is_none() && partial_information(&s) <= 0.5 * m0 {
            eps_ratio = Some(eps.log10());
        }
    }
    let eps_ratio = eps_ratio.unwrap_or(EPS_LOG_HI + base.log10());
    [m0, h_max, eps_ratio]
}

/// `[nn_nb.mean_ratio, dist_ratio.coeff_var]`.
pub fn nbc_features(x: &[Vec<f64>], y: &[f64]) -> [f64; 2] {
    let n = x.len();
    let mut nn = Vec::new();
    let mut nb = Vec::new();
    for i in 0..n {
        let mut dn = f64::INFINITY;
        let mut db = f64::INFINITY;
        for j in 0..n {
            if i == j {
                continue;
            }
            let dij = dist(&x[i], &x[j]);
            dn = dn.min(dij);
            if y[j] < y[i] {
                db = db.min(dij);
            }
        }
        if db.is_finite() && dn.is_finite() && db > 0.0 {
            nn.push(dn);
            nb.push(db);
        }
    }
    if nn.is_empty() {
        return [1.0, 0.0];
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mean_ratio = mean(&nn) / mean(&nb);
    let ratios: Vec<f64> = nn.iter().zip(&nb).map(|(a, b)| a / b).collect();
    let m = mean(&ratios);
    let sd = (ratios.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (ratios.len().max(2) - 1) as f64).sqrt();
    [mean_ratio, if m > 0.0 { sd / m } else { 0.0 }]
}

/// Local maxima of a Gaussian kernel density over `y` with Silverman's
/// bandwidth, on a 512-point grid.
pub fn number_of_peaks(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| sorted[((p * (sorted.len() - 1) as f64).round() as usize).min(sorted.len() - 1)];
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * n.powf(-0.2);
    if !(h > 1e-12) {
        return 1.0;
    }
    let (lo, hi) = (sorted[0] - 3.0 * h, sorted[sorted.len() - 1] + 3.0 * h);
    let grid = 512;
    let dens: Vec<f64> = (0..grid)
        .map(|k| {
            let g = lo + (hi - lo) * k as f64 / (grid - 1) as f64;
            y.iter().map(|v| (-0.5 * ((g - v) / h).powi(2)).exp()).sum::<f64>()
        })
        .collect();
    let mut peaks = 0;
    let mut rising = true;
    for k in 1..grid {
        if dens[k] > dens[k - 1] {
            rising = true;
        } else if dens[k] < dens[k - 1] && rising {
            peaks += 1;
            rising = false;
        }
    }
    peaks.max(1) as f64
}

/// All nine landscape features of a sample. Objective values are min-max
/// normalized to [0, 1] first.
pub fn ela_from_sample(x: &[Vec<f64>], y: &[f64], rng: &mut Rng) -> [f64; ELA_DIM] {
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let yn: Vec<f64> = if hi - lo > 1e-12 * hi.abs().max(1.0) {
        y.iter().map(|v| (v - lo) / (hi - lo)).collect()
    } else {
        vec![0.0; y.len()]
    };
    let meta = meta_model(x, &yn);
    let start = rng.random_range(0..x.len());
    let ic = information_features(x, &yn, start);
    let nbc = nbc_features(x, &yn);
    [meta[0], meta[1], meta[2], ic[0], ic[1], ic[2], nbc[0], nbc[1], number_of_peaks(&yn)]
}

/// Landscape features of `inst` from `100·D` uniform points, outside the
/// optimization budget.
pub fn compute_ela(inst: &ProblemInstance, seed: u64) -> [f64; ELA_DIM] {
    let mut r = rng::stream(rng::derive(seed, inst.seed), tag::ELA);
    let (d, lb, ub) = (inst.dim(), inst.lb(), inst.ub());
    let n = SAMPLES_PER_DIM * d;
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| lb + (ub - lb) * r.random::<f64>()).collect()).collect();
    let y: Vec<f64> = x.iter().map(|v| inst.eval(v)).collect();
    ela_from_sample(&x, &y, &mut r)
}

fn cache() -> &'static Mutex<HashMap<(String, u64), ProblemFeatures>> {
    static C: OnceLock<Mutex<HashMap<(String, u64), ProblemFeatures>>> = OnceLock::new();
    C.get_or_init(Default::default)
}

/// The 13-entry problem feature vector, cached per `(instance, seed)`.
pub fn problem_feature_vector(inst: &ProblemInstance, seed: u64) -> ProblemFeatures {
    let key = (inst.hash().to_string(), seed);
    if let Some(v) = cache().lock().unwrap().get(&key) {
        return v.clone();
    }
    let ela = compute_ela(inst, seed);
    let mut values = vec![
        (inst.dim() as f64).log10() / 5.0,
        (inst.max_fes() as f64).log10() / 10.0,
        inst.ub() / 100.0,
        inst.lb() / 100.0,
    ];
    values.extend(ela);
    let out = ProblemFeatures { values, sample_size: SAMPLES_PER_DIM * inst.dim(), seed };
    cache().lock().unwrap().insert(key, out.clone());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{generate_instance, BasicFunction, GenOptions};
    use rand::SeedableRng;

    fn sample(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut r = Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..d).map(|_| r.random_range(-5.0..5.0)).collect()).collect()
    }

    #[test]
    fn quadratic_fits_quadratic_model() {
        let x = sample(300, 3, 1);
        let y: Vec<f64> = x.iter().map(|v| v.iter().map(|a| a * a).sum()).collect();
        let f = ela_from_sample(&x, &y, &mut Rng::seed_from_u64(0));
        assert!(f[1] >= 0.99, "{}", f[1]);
    }

    #[test]
    fn constant_objective() {
        let x = sample(200, 2, 2);
        let y = vec![4.2; 200];
        let f = ela_from_sample(&x, &y, &mut Rng::seed_from_u64(0));
        assert_eq!(f[8], 1.0);
        assert_eq!(f[4], 0.0);
        assert_eq!(f[3], 0.0);
        assert_eq!((f[1], f[2]), (0.0, 0.0));
        assert_eq!((f[6], f[7]), (1.0, 0.0));
        assert!(f.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn linear_objective_intercept() {
        let x = sample(200, 4, 3);
        let y: Vec<f64> = x.iter().map(|v| v.iter().sum()).collect();
        let f = ela_from_sample(&x, &y, &mut Rng::seed_from_u64(0));
        assert!(f[2] >= 0.99);
        // independent fit of the normalized target through an SVD solve
        let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let a = DMatrix::from_fn(200, 5, |i, c| if c == 0 { 1.0 } else { x[i][c - 1] });
        let b = DVector::from_iterator(200, y.iter().map(|v| (v - lo) / (hi - lo)));
        let sol = a.svd(true, true).solve(&b, 1e-12).unwrap();
        assert!((f[0] - sol[0]).abs() < 1e-9, "{} vs {}", f[0], sol[0]);
    }

    #[test]
    fn interaction_design_columns() {
        let x = vec![vec![2.0, 3.0, 5.0]];
        let m = design(&x, false, true);
        assert_eq!(m.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 2.0, 3.0, 5.0, 6.0, 10.0, 15.0]);
        let m = design(&x, true, false);
        assert_eq!(m.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 2.0, 3.0, 5.0, 4.0, 9.0, 25.0]);
    }

    #[test]
    fn bimodal_values_have_two_peaks() {
        let y: Vec<f64> = (0..400).map(|i| if i % 2 == 0 { 0.0 } else { 1.0 } + (i as f64 * 0.37).sin() * 0.01).collect();
        assert_eq!(number_of_peaks(&y), 2.0);
    }

    #[test]
    fn information_content_bounds() {
        let x: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 0.0 } else { 1.0 }).collect();
        let [m0, h, _] = information_features(&x, &y, 0);
        assert!((m0 - 1.0).abs() < 1e-12);
        assert!(h > 0.0 && h <= 1.0);
        let y: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let [m0, h, _] = information_features(&x, &y, 0);
        assert!((m0 - 1.0 / 99.0).abs() < 1e-12);
        assert_eq!(h, 0.0);
    }

    #[test]
    fn basics_and_determinism() {
        let inst = generate_instance(0, 1, &GenOptions::single(BasicFunction::Rastrigin, 10, 50.0, 10_000)).unwrap();
        let a = problem_feature_vector(&inst, 3);
        assert_eq!(a.values.len(), PROBLEM_FEATURE_DIM);
        assert!((a.values[0] - 0.2).abs() < 1e-15);
        assert!((a.values[1] - 0.4).abs() < 1e-15);
        assert_eq!((a.values[2], a.values[3]), (0.5, -0.5));
        assert!(a.values.iter().all(|v| v.is_finite()));
        let fresh = compute_ela(&inst, 3);
        assert_eq!(&a.values[4..], &fresh[..]);
        assert_eq!(a.sample_size, 1000);
    }
}
