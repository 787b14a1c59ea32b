//! Two-sided Wilcoxon rank-sum test with the normal approximation.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Significance level behind the `+`/`-`/`=` marks.
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSum {
    /// Mann-Whitney statistic of the first sample.
    pub u: f64,
    pub z: f64,
    pub p: f64,
}

/// Average ranks (1-based) of the pooled sample.
fn ranks(v: &[f64]) -> (Vec<f64>, f64) {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        i = j + 1;
    }
    (r, ties)
}

/// Tie-corrected rank-sum test of `a` against `b`, without continuity
/// correction.
pub fn rank_sum(a: &[f64], b: &[f64]) -> RankSum {
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (r, ties) = ranks(&pooled);
    let w: f64 = r[..a.len()].iter().sum();
    let u = w - n1 * (n1 + 1.0) / 2.0;
    let n = n1 + n2;
    let var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if a.is_empty() || b.is_empty() || var <= 0.0 {
        return RankSum { u, z: 0.0, p: 1.0 };
    }
    let z = (u - n1 * n2 / 2.0) / var.sqrt();
    let p = (2.0 * Normal::standard().sf(z.abs())).min(1.0);
    RankSum { u, z, p }
}

/// Outcome of comparing a reference against another method, lower being
/// better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mark {
    /// The reference is significantly better.
    #[serde(rename = "+")]
    Better,
    /// The reference is significantly worse.
    #[serde(rename = "-")]
    Worse,
    #[serde(rename = "=")]
    Tie,
}

impl Mark {
    pub fn symbol(self) -> &'static str {
        match self {
            Mark::Better => "+",
            Mark::Worse => "-",
            Mark::Tie => "=",
        }
    }

    pub fn compare(reference: &[f64], other: &[f64], alpha: f64) -> Mark {
        let t = rank_sum(reference, other);
        if t.p >= alpha {
            Mark::Tie
        } else if t.z < 0.0 {
            Mark::Better
        } else {
            Mark::Worse
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Frozen from an independent implementation (asymptotic two-sided
    /// Mann-Whitney with tie correction, no continuity correction).
    #[test]
    fn matches_reference_values() {
        let a = [0.12, 0.3, 0.3, 0.45, 0.5, 0.61, 0.7];
        let b = [0.3, 0.55, 0.8, 0.8, 0.9, 1.1];
        let t = rank_sum(&a, &b);
        assert_eq!(t.u, 7.0);
        assert!((t.p - 0.044022195041670056).abs() < 1e-10, "{}", t.p);
        assert_eq!(Mark::compare(&a, &b, ALPHA), Mark::Better);
        assert_eq!(Mark::compare(&b, &a, ALPHA), Mark::Worse);
    }

    #[test]
    fn identical_samples_tie() {
        let a = [1.0, 1.0, 1.0];
        assert_eq!(rank_sum(&a, &a).p, 1.0);
        assert_eq!(Mark::compare(&a, &a, ALPHA), Mark::Tie);
        assert_eq!(Mark::compare(&[], &a, ALPHA), Mark::Tie);
    }

    #[test]
    fn average_ranks() {
        let (r, ties) = ranks(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(r, vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(ties, 6.0);
    }

    proptest! {
        #[test]
        fn swapping_samples_mirrors_the_test(
            a in prop::collection::vec(0.0f64..1.0, 1..15),
            b in prop::collection::vec(0.0f64..1.0, 1..15),
        ) {
            let x = rank_sum(&a, &b);
            let y = rank_sum(&b, &a);
            prop_assert!((x.p - y.p).abs() < 1e-12);
            prop_assert!((x.z + y.z).abs() < 1e-9);
            prop_assert!((x.u + y.u - (a.len() * b.len()) as f64).abs() < 1e-9);
            prop_assert!(x.p > 0.0 && x.p <= 1.0);
        }
    }
}
