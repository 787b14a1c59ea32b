//! Per-generation optimization progress features.

use crate::engine::ops::{argmin, dist, ranking};

pub const PROGRESS_DIM: usize = 9;

/// Episode-level quantities shared by every subpopulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProgressContext {
    /// Best objective after initialization.
    pub f0: f64,
    pub f_star: f64,
    pub lb: f64,
    pub ub: f64,
    pub dim: usize,
    pub fes: usize,
    pub max_fes: usize,
}

impl ProgressContext {
    /// Objective normalizer; a zero initial gap falls back to 1e-12.
    fn scale(&self) -> f64 {
        let gap = self.f0 - self.f_star;
        if gap > 1e-12 { gap } else { 1e-12 }
    }

    fn diameter(&self) -> f64 {
        (self.ub - self.lb) * (self.dim as f64).sqrt()
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn std(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

fn max_pairwise(x: &[&[f64]]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            best = best.max(dist(x[i], x[j]));
        }
    }
    best
}

/// Fitness-distance correlation against the best member, in Pearson form.
/// Zero when either variance is below 1e-24.
pub fn fdc(x: &[&[f64]], f: &[f64]) -> f64 {
    let b = argmin(f);
    let d: Vec<f64> = x.iter().map(|xi| dist(xi, x[b])).collect();
    let (fm, dm) = (mean(f), mean(&d));
    let n = f.len() as f64;
    let cov = f.iter().zip(&d).map(|(a, c)| (a - fm) * (c - dm)).sum::<f64>() / n;
    let vf = f.iter().map(|a| (a - fm).powi(2)).sum::<f64>() / n;
    let vd = d.iter().map(|a| (a - dm).powi(2)).sum::<f64>() / n;
    if vf < 1e-24 || vd < 1e-24 {
        return 0.0;
    }
    (cov / (vf.sqrt() * vd.sqrt())).clamp(-1.0, 1.0)
}

/// The nine progress features of a local (sub)population inside the whole
/// population.
pub fn progress_features(
    local_x: &[&[f64]],
    local_f: &[f64],
    all_x: &[&[f64]],
    all_f: &[f64],
    ctx: &ProgressContext,
) -> [f64; PROGRESS_DIM] {
    let s = ctx.scale();
    let diam = ctx.diameter();
    let norm: Vec<f64> = local_f.iter().map(|v| v / s).collect();
    let spread = (max_pairwise(local_x) / diam).min(1.0);
    let top_n = ((0.1 * local_f.len() as f64).ceil() as usize).max(2).min(local_f.len());
    let top: Vec<&[f64]> = ranking(local_f).into_iter().take(top_n).map(|i| local_x[i]).collect();
    let top_spread = (max_pairwise(&top) / diam).min(1.0);
    let remaining = ctx.max_fes.saturating_sub(ctx.fes) as f64 / ctx.max_fes as f64;
    [
        norm.iter().cloned().fold(f64::INFINITY, f64::min),
        mean(&norm),
        std(&norm),
        spread,
        top_spread - spread,
        fdc(local_x, local_f),
        all_f.iter().cloned().fold(f64::INFINITY, f64::min) / s,
        fdc(all_x, all_f),
        remaining,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ctx() -> ProgressContext {
        ProgressContext { f0: 10.0, f_star: 0.0, lb: -5.0, ub: 5.0, dim: 2, fes: 100, max_fes: 1000 }
    }

    fn refs(x: &[Vec<f64>]) -> Vec<&[f64]> {
        x.iter().map(|v| v.as_slice()).collect()
    }

    #[test]
    fn identical_population() {
        let x = vec![vec![1.0, 1.0]; 5];
        let f = vec![3.0; 5];
        let o = progress_features(&refs(&x), &f, &refs(&x), &f, &ctx());
        assert_eq!((o[2], o[3], o[4]), (0.0, 0.0, 0.0));
        assert_eq!(o[5], 0.0);
        assert!((o[8] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn two_point_fdc() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!((fdc(&refs(&x), &[0.0, 1.0]) - 1.0).abs() < 1e-12);
        assert!((fdc(&refs(&x), &[1.0, 0.0]) - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn scale_and_translation(
            pts in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 4..20),
            fs in prop::collection::vec(0.0f64..100.0, 20),
            c in 0.01f64..100.0,
            shift in prop::collection::vec(-1.0f64..1.0, 3),
        ) {
            let n = pts.len();
            let f = &fs[..n];
            let base = ProgressContext { f0: 150.0, f_star: 0.0, lb: -5.0, ub: 5.0, dim: 3, fes: 10, max_fes: 100 };
            let o = progress_features(&refs(&pts), f, &refs(&pts), f, &base);

            let fc: Vec<f64> = f.iter().map(|v| v * c).collect();
            let scaled = ProgressContext { f0: 150.0 * c, ..base };
            let oc = progress_features(&refs(&pts), &fc, &refs(&pts), &fc, &scaled);
            for k in [0, 1, 2, 6] {
                prop_assert!((o[k] - oc[k]).abs() <= 1e-12 * o[k].abs().max(1.0));
            }

            let moved: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().zip(&shift).map(|(a, b)| a + b).collect()).collect();
            let om = progress_features(&refs(&moved), f, &refs(&moved), f, &base);
            prop_assert!((o[3] - om[3]).abs() < 1e-12 && (o[4] - om[4]).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&o[3]) && (0.0..=1.0).contains(&o[8]));
            prop_assert!(o[4] <= 1e-15);
            prop_assert!(o.iter().all(|v| v.is_finite()));
        }
    }
}
