use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::ProblemInstance;
use crate::rng::{self, tag};

/// Smallest value of `f` over `samples` uniform points in `[lb, ub]^dim`.
pub fn random_search_min(
    f: impl Fn(&[f64]) -> f64,
    dim: usize,
    lb: f64,
    ub: f64,
    samples: usize,
    rng: &mut rng::Rng,
) -> f64 {
    let mut x = vec![0.0; dim];
    let mut best = f64::INFINITY;
    for _ in 0..samples {
        for v in x.iter_mut() {
            *v = rng.random_range(lb..=ub);
        }
        best = best.min(f(&x));
    }
    best
}

fn cache() -> &'static Mutex<HashMap<(String, u64), f64>> {
    static C: OnceLock<Mutex<HashMap<(String, u64), f64>>> = OnceLock::new();
    C.get_or_init(Default::default)
}

/// Best objective among `maxFEs` uniform samples, cached per
/// `(instance, seed)`.
pub fn random_search_baseline(inst: &ProblemInstance, seed: u64) -> f64 {
    let key = (inst.hash().to_string(), seed);
    if let Some(&v) = cache().lock().unwrap().get(&key) {
        return v;
    }
    let mut r = rng::stream(rng::derive(seed, inst.seed), tag::RANDOM_SEARCH);
    let v = random_search_min(|x| inst.eval(x), inst.dim(), inst.lb(), inst.ub(), inst.max_fes(), &mut r);
    cache().lock().unwrap().insert(key, v);
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalized {
    pub value: f64,
    /// Set when the baseline is too close to zero to divide by; `value`
    /// then holds the raw objective.
    pub degenerate: bool,
}

pub fn normalize_objective(f_best: f64, f_rs: f64) -> Normalized {
    if f_rs.abs() < 1e-12 {
        Normalized { value: f_best, degenerate: true }
    } else {
        Normalized { value: f_best / f_rs, degenerate: false }
    }
}
