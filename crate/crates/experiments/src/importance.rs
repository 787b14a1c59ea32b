//! How strongly the choice of sub-module within each kind depends on a
//! problem characteristic, measured by KL divergence between occurrence
//! distributions of instance groups.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use autoec_core::problem::{Conditioning, GlobalStructure, Modality, ProblemInstance};
use autoec_core::space::{registry, ModuleKind, Workflow};

use crate::error::{ExpError, Result};
use crate::eval::EvalResult;
use crate::SCHEMA_VERSION;

pub const CHARACTERISTICS: [&str; 6] =
    ["Dimension", "maxFEs", "Search Range", "Modality", "Global Structure", "Conditioning"];

/// Group labels of an instance, one per characteristic. Composed
/// instances take the harder label whenever any component has it.
pub fn characteristic_labels(inst: &ProblemInstance) -> [String; 6] {
    let tags: Vec<_> = inst.components().iter().map(|f| f.tags()).collect();
    let multimodal = tags.iter().any(|t| t.0 == Modality::Multimodal);
    let weak = tags.iter().any(|t| t.1 == GlobalStructure::Weak);
    let high = tags.iter().any(|t| t.2 == Conditioning::High);
    [
        inst.dim().to_string(),
        inst.max_fes().to_string(),
        format!("[{}, {}]", inst.lb(), inst.ub()),
        if multimodal { "Multimodal" } else { "Unimodal" }.to_string(),
        if weak { "Weak" } else { "Adequate" }.to_string(),
        if high { "High" } else { "Low" }.to_string(),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceMatrix {
    pub schema_version: u32,
    /// Row labels: the ten functional module kinds.
    pub kinds: Vec<String>,
    /// Column labels.
    pub characteristics: Vec<String>,
    /// Maximum pairwise KL divergence; `None` when no pair of groups could
    /// be compared.
    pub raw: Vec<Vec<Option<f64>>>,
    /// Column-wise `(x - mean) / std` over the defined entries.
    pub standardized: Vec<Vec<Option<f64>>>,
}

/// Add-one smoothed relative frequencies.
pub fn smoothed(counts: &[usize]) -> Vec<f64> {
    let total = counts.iter().sum::<usize>() + counts.len();
    counts.iter().map(|&c| (c + 1) as f64 / total as f64).collect()
}

/// `KL(p ‖ q)` in nats.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum::<f64>().max(0.0)
}

/// Largest divergence over ordered pairs of groups; groups without any
/// occurrence of the kind are left out.
pub fn max_pairwise_kl(groups: &[Vec<usize>]) -> Option<f64> {
    let dists: Vec<Vec<f64>> = groups.iter().filter(|c| c.iter().sum::<usize>() > 0).map(|c| smoothed(c)).collect();
    let mut best: Option<f64> = None;
    for (i, p) in dists.iter().enumerate() {
        for (j, q) in dists.iter().enumerate() {
            if i != j {
                let d = kl_divergence(p, q);
                best = Some(best.map_or(d, |b| b.max(d)));
            }
        }
    }
    best
}

/// Standardizes the defined entries with the population standard
/// deviation. A column whose defined entries are all equal maps to zeros.
pub fn standardize(col: &[Option<f64>]) -> Vec<Option<f64>> {
    let vals: Vec<f64> = col.iter().flatten().copied().collect();
    if vals.is_empty() {
        return col.to_vec();
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let std = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    col.iter()
        .map(|v| v.map(|x| if std > 1e-300 { (x - mean) / std } else { 0.0 }))
        .collect()
}

/// Builds the matrix from per-instance labels and workflows.
pub fn importance_analysis(samples: &[([String; 6], &Workflow)]) -> ImportanceMatrix {
    let reg = registry();
    let kinds = ModuleKind::FUNCTIONAL;
    let mut raw = vec![vec![None; CHARACTERISTICS.len()]; kinds.len()];
    for (r, &kind) in kinds.iter().enumerate() {
        let variants = reg.tokens_of_kind(kind);
        for (c, row) in raw[r].iter_mut().enumerate() {
            let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (labels, wf) in samples {
                let counts = groups.entry(labels[c].as_str()).or_insert_with(|| vec![0; variants.len()]);
                for t in wf.tokens() {
                    if let Some(k) = variants.iter().position(|v| v == t) {
                        counts[k] += 1;
                    }
                }
            }
            let groups: Vec<Vec<usize>> = groups.into_values().collect();
            *row = max_pairwise_kl(&groups);
        }
    }
    let mut standardized = raw.clone();
    for c in 0..CHARACTERISTICS.len() {
        let col: Vec<Option<f64>> = raw.iter().map(|row| row[c]).collect();
        for (r, v) in standardize(&col).into_iter().enumerate() {
            standardized[r][c] = v;
        }
    }
    ImportanceMatrix {
        schema_version: SCHEMA_VERSION,
        kinds: kinds.iter().map(|k| k.name().to_string()).collect(),
        characteristics: CHARACTERISTICS.iter().map(|s| s.to_string()).collect(),
        raw,
        standardized,
    }
}

/// Pairs each evaluated instance with its recorded workflow.
pub fn importance_from_eval(result: &EvalResult, instances: &[ProblemInstance]) -> Result<ImportanceMatrix> {
    let by_id: BTreeMap<usize, &ProblemInstance> = instances.iter().map(|i| (i.id, i)).collect();
    let workflows = result.workflows()?;
    if workflows.is_empty() {
        return Err(ExpError::Invalid("the evaluation recorded no workflows".into()));
    }
    let mut samples = Vec::new();
    for (id, wf) in &workflows {
        let inst = by_id.get(id).ok_or_else(|| ExpError::Invalid(format!("instance {id} is not in the problem set")))?;
        samples.push((characteristic_labels(inst), wf));
    }
    Ok(importance_analysis(&samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use autoec_core::engine::named_workflow;
    use autoec_core::problem::{generate_instance, BasicFunction, GenOptions, Mode};
    use autoec_core::rng;
    use proptest::prelude::*;

    #[test]
    fn smoothed_kl_by_hand() {
        // (1, 0) and (0, 1) smooth to (2/3, 1/3) and (1/3, 2/3)
        let p = smoothed(&[1, 0]);
        let q = smoothed(&[0, 1]);
        assert_eq!(p, vec![2.0 / 3.0, 1.0 / 3.0]);
        let expected = (2.0 / 3.0) * 2f64.ln() + (1.0 / 3.0) * 0.5f64.ln();
        assert!((kl_divergence(&p, &q) - expected).abs() < 1e-15);
        assert!((max_pairwise_kl(&[vec![1, 0], vec![0, 1]]).unwrap() - 2f64.ln() / 3.0).abs() < 1e-15);
    }

    #[test]
    fn identical_distributions_give_zero() {
        assert_eq!(max_pairwise_kl(&[vec![3, 1, 0], vec![3, 1, 0]]), Some(0.0));
        assert_eq!(max_pairwise_kl(&[vec![2, 2], vec![0, 0]]), None);
        assert_eq!(max_pairwise_kl(&[vec![2, 2]]), None);
    }

    #[test]
    fn composed_labels_take_the_harder_value() {
        let opts = GenOptions { mode: Some(Mode::Composition), dims: vec![10], ..Default::default() };
        for s in 0..20 {
            let inst = generate_instance(0, s, &opts).unwrap();
            let l = characteristic_labels(&inst);
            let any_multi = inst.components().iter().any(|f| f.tags().0 == Modality::Multimodal);
            assert_eq!(l[3] == "Multimodal", any_multi);
            assert_eq!(l, characteristic_labels(&inst));
        }
        let sphere = generate_instance(0, 1, &GenOptions::single(BasicFunction::Sphere, 5, 5.0, 1000)).unwrap();
        assert_eq!(characteristic_labels(&sphere), ["5", "1000", "[-5, 5]", "Unimodal", "Adequate", "Low"].map(String::from));
    }

    #[test]
    fn matrix_shape_and_zero_for_identical_groups() {
        let de = named_workflow(&["Uniform", "DE/rand/1", "Binomial", "Clip", "DE-like", "end"]);
        let pso = named_workflow(&["Sobol", "Vanilla_PSO", "Clip", "PSO-like", "end"]);
        let lab = |d: &str, m: &str| [d, "1000", "[-5, 5]", m, "Adequate", "Low"].map(String::from);
        let samples = vec![
            (lab("5", "Unimodal"), &de),
            (lab("10", "Unimodal"), &de),
            (lab("5", "Multimodal"), &pso),
            (lab("10", "Multimodal"), &pso),
        ];
        let m = importance_analysis(&samples);
        assert_eq!((m.raw.len(), m.raw[0].len()), (10, 6));
        let init = m.kinds.iter().position(|k| k == ModuleKind::Initialization.name()).unwrap();
        // grouping by dimension mixes both workflows equally
        assert_eq!(m.raw[init][0], Some(0.0));
        assert!(m.raw[init][3].unwrap() > 0.0);
        // one group only: nothing to compare
        assert_eq!(m.raw[init][1], None);
        let niching = m.kinds.iter().position(|k| k == ModuleKind::Niching.name()).unwrap();
        assert_eq!(m.raw[niching][3], None);
    }

    #[test]
    fn standardization_identity() {
        let col = vec![Some(0.3), None, Some(1.2), Some(0.0), Some(0.7)];
        let z: Vec<f64> = standardize(&col).into_iter().flatten().collect();
        let mean = z.iter().sum::<f64>() / 4.0;
        let std = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0).sqrt();
        assert!(mean.abs() < 1e-12 && (std - 1.0).abs() < 1e-12);
        assert_eq!(standardize(&[Some(2.0), Some(2.0)]), vec![Some(0.0), Some(0.0)]);
    }

    proptest! {
        #[test]
        fn kl_is_non_negative(a in prop::collection::vec(0usize..20, 2..8), seed in any::<u64>()) {
            use rand::Rng as _;
            let mut r = rng::from_seed(seed);
            let b: Vec<usize> = a.iter().map(|_| r.random_range(0..20)).collect();
            if let Some(d) = max_pairwise_kl(&[a.clone(), b]) {
                prop_assert!(d >= 0.0);
            }
            if a.iter().sum::<usize>() > 0 {
                prop_assert_eq!(max_pairwise_kl(&[a.clone(), a.clone()]), Some(0.0));
            }
        }

        #[test]
        fn standardized_columns_have_unit_spread(v in prop::collection::vec(0.0f64..10.0, 2..12)) {
            let col: Vec<Option<f64>> = v.iter().map(|x| Some(*x)).collect();
            let z: Vec<f64> = standardize(&col).into_iter().flatten().collect();
            let n = z.len() as f64;
            let mean = z.iter().sum::<f64>() / n;
            let std = (z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() < 1e-9);
            let spread = v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min);
            if spread > 1e-6 {
                prop_assert!((std - 1.0).abs() < 1e-9);
            }
        }
    }
}
