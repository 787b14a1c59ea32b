//! Hand-designed optimizers expressed as fixed workflows.

use std::fmt;
use std::str::FromStr;

use autoec_core::engine::{canonical_de, named_workflow};
use autoec_core::space::Workflow;

use crate::error::ExpError;
use crate::eval::Method;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    CanonicalDe,
    CanonicalPso,
    RandomSearch,
}

impl Baseline {
    pub const ALL: [Baseline; 3] = [Baseline::CanonicalDe, Baseline::CanonicalPso, Baseline::RandomSearch];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::CanonicalDe => "canonical_de",
            Baseline::CanonicalPso => "canonical_pso",
            Baseline::RandomSearch => "random_search",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Baseline {
    type Err = ExpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Baseline::ALL.into_iter().find(|b| b.name() == s).ok_or_else(|| ExpError::UnknownBaseline(s.to_string()))
    }
}

/// Uniform init, global-best PSO, clipping and personal-best selection.
pub fn canonical_pso() -> Workflow {
    named_workflow(&["Uniform", "Vanilla_PSO", "Clip", "PSO-like", "end"])
}

/// The workflow of a baseline; random search has none.
pub fn baseline_workflow(b: Baseline) -> Option<Workflow> {
    match b {
        Baseline::CanonicalDe => Some(canonical_de()),
        Baseline::CanonicalPso => Some(canonical_pso()),
        Baseline::RandomSearch => None,
    }
}

/// Baselines run with registry defaults (F = 0.5, Cr = 0.9 for DE;
/// w = 0.7, c1 = c2 = 1.49445 for PSO).
pub fn baseline_method(b: Baseline) -> Method<'static> {
    match baseline_workflow(b) {
        Some(workflow) => Method::Fixed { workflow, configs: None },
        None => Method::RandomSearch,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use autoec_core::engine::{ConfigAssignment, EngineOptions, Episode};
    use autoec_core::problem::{generate_instance, BasicFunction, GenOptions};
    use autoec_core::rng;
    use autoec_core::space::registry;

    #[test]
    fn names_round_trip_and_unknown_is_rejected() {
        for b in Baseline::ALL {
            assert_eq!(b.name().parse::<Baseline>().unwrap(), b);
        }
        assert!(matches!("cma".parse::<Baseline>(), Err(ExpError::UnknownBaseline(_))));
    }

    #[test]
    fn workflows_are_legal_and_named() {
        let de = baseline_workflow(Baseline::CanonicalDe).unwrap();
        assert_eq!(de.names(), ["Uniform", "DE/rand/1", "Binomial", "Clip", "DE-like", "end"]);
        let pso = baseline_workflow(Baseline::CanonicalPso).unwrap();
        assert_eq!(pso.names(), ["Uniform", "Vanilla_PSO", "Clip", "PSO-like", "end"]);
        for w in [de, pso] {
            assert!(Workflow::from_tokens(w.tokens().to_vec(), None).is_ok());
        }
        assert!(baseline_workflow(Baseline::RandomSearch).is_none());
    }

    #[test]
    fn default_configs_match_the_documented_values() {
        let mut r = rng::from_seed(0);
        let de = ConfigAssignment::defaults(&canonical_de(), &mut r);
        assert_eq!(de.0, vec![vec![0.5], vec![0.9]]);
        let pso = ConfigAssignment::defaults(&canonical_pso(), &mut r);
        assert_eq!(pso.0, vec![vec![0.7, 1.49445, 1.49445]]);
        let names: Vec<_> = registry().get(canonical_pso().tokens()[1]).config.params.iter().map(|p| p.name).collect();
        assert_eq!(names, ["w", "c1", "c2"]);
    }

    /// Reference run: PSO improves its best-so-far within 100 generations.
    #[test]
    fn canonical_pso_improves_on_sphere() {
        let wf = canonical_pso();
        let opts = GenOptions::single(BasicFunction::Sphere, 5, 5.0, 100_000);
        for seed in 0..10 {
            let inst = generate_instance(0, seed, &opts).unwrap();
            let mut ep = Episode::new(&wf, &inst, seed, &EngineOptions::default()).unwrap();
            let cfg = ConfigAssignment::defaults(&wf, &mut rng::from_seed(seed));
            let f0 = ep.state().best_f;
            for _ in 0..100 {
                ep.step(&cfg).unwrap();
            }
            assert!(ep.state().best_f < f0, "seed {seed}");
        }
    }
}
