//! Running policies and fixed workflows over problem sets.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use autoec_agents::{Checkpoint, Composer, ConfigPolicy, Decode, ModelConfig, PolicyController};
use autoec_core::engine::{run_episode, ConfigAssignment, Controller, DefaultController, EngineOptions, FixedController};
use autoec_core::features::ela::{problem_feature_vector, PROBLEM_FEATURE_DIM};
use autoec_core::problem::{normalize_objective, random_search_baseline, random_search_min, ProblemInstance};
use autoec_core::rng::{self, tag};
use autoec_core::space::Workflow;

use crate::error::Result;
use crate::SCHEMA_VERSION;

/// What produces the workflow and the per-generation configurations.
#[derive(Debug, Clone)]
pub enum Method<'a> {
    /// A composer writes the workflow; the controller (or registry defaults
    /// when absent) configures it.
    Agents {
        composer: &'a Composer,
        controller: Option<&'a ConfigPolicy>,
        decode: Decode,
        /// Feed zeros instead of problem and progress features.
        zero_features: bool,
    },
    /// One workflow for every instance, with fixed or default configs.
    Fixed { workflow: Workflow, configs: Option<ConfigAssignment> },
    /// One workflow for every instance, configured by a controller.
    Tuned { workflow: Workflow, controller: &'a ConfigPolicy, decode: Decode },
    /// Uniform sampling of the whole budget.
    RandomSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub runs: usize,
    pub seed: u64,
    pub np_init: Option<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { runs: 51, seed: 0, np_init: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub instance: usize,
    pub run: usize,
    pub final_best: f64,
    pub random_search: f64,
    pub normalized: f64,
    pub degenerate: bool,
    pub generations: usize,
    pub fes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub instance: usize,
    pub hash: String,
    /// Module names in pre-order, empty for random search.
    pub workflow: Vec<String>,
    pub n_nich: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub schema_version: u32,
    pub method: String,
    pub seed: u64,
    pub runs_per_instance: usize,
    pub instances: Vec<InstanceSummary>,
    pub runs: Vec<RunRecord>,
    /// Mean and sample standard deviation of every normalized value.
    pub mean: f64,
    pub std: f64,
}

impl EvalResult {
    /// Normalized values of one instance, in run order.
    pub fn values_of(&self, instance: usize) -> Vec<f64> {
        self.runs.iter().filter(|r| r.instance == instance).map(|r| r.normalized).collect()
    }

    pub fn all_values(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.normalized).collect()
    }

    /// Rebuilds the recorded workflow of each instance.
    pub fn workflows(&self) -> Result<Vec<(usize, Workflow)>> {
        let reg = autoec_core::space::registry();
        self.instances
            .iter()
            .filter(|s| !s.workflow.is_empty())
            .map(|s| {
                let tokens = s
                    .workflow
                    .iter()
                    .map(|n| {
                        reg.token_by_name(n)
                            .ok_or_else(|| crate::ExpError::Invalid(format!("unknown module {n}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let n = if s.n_nich > 0 { Some(s.n_nich) } else { None };
                Ok((s.instance, Workflow::from_tokens(tokens, n)?))
            })
            .collect()
    }
}

/// Mean and sample standard deviation; a single value has zero spread.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn features_for(inst: &ProblemInstance, zero: bool, seed: u64) -> Vec<f64> {
    if zero {
        vec![0.0; PROBLEM_FEATURE_DIM]
    } else {
        problem_feature_vector(inst, seed).values
    }
}

fn instance_workflow(method: &Method, inst: &ProblemInstance, idx: usize, seed: u64) -> Option<Workflow> {
    match method {
        Method::Agents { composer, decode, zero_features, .. } => {
            let f = features_for(inst, *zero_features, seed);
            let mut r = rng::stream(rng::derive_path(seed, &[idx as u64]), tag::WORKFLOW);
            Some(composer.generate(&f, &mut r, *decode).workflow)
        }
        Method::Fixed { workflow, .. } | Method::Tuned { workflow, .. } => Some(workflow.clone()),
        Method::RandomSearch => None,
    }
}

fn one_run(
    method: &Method,
    workflow: Option<&Workflow>,
    inst: &ProblemInstance,
    seed: u64,
    opts: &EvalOptions,
) -> Result<(f64, usize, usize)> {
    let engine = EngineOptions { np_init: opts.np_init };
    let (wf, mut policy, mut defaults, mut fixed);
    let ctrl: &mut dyn Controller = match (method, workflow) {
        (Method::RandomSearch, _) | (_, None) => {
            let mut r = rng::stream(seed, tag::RANDOM_SEARCH);
            let best = random_search_min(|x| inst.eval(x), inst.dim(), inst.lb(), inst.ub(), inst.max_fes(), &mut r);
            return Ok((best, 0, inst.max_fes()));
        }
        (Method::Agents { controller: Some(p), decode, zero_features, .. }, Some(w)) => {
            wf = w;
            policy = PolicyController { policy: p, decode: *decode, blind: *zero_features };
            &mut policy
        }
        (Method::Tuned { controller, decode, .. }, Some(w)) => {
            wf = w;
            policy = PolicyController { policy: controller, decode: *decode, blind: false };
            &mut policy
        }
        (Method::Fixed { configs: Some(c), .. }, Some(w)) => {
            wf = w;
            fixed = FixedController(c.clone());
            &mut fixed
        }
        (_, Some(w)) => {
            wf = w;
            defaults = DefaultController;
            &mut defaults
        }
    };
    let tr = run_episode(wf, inst, ctrl, seed, &engine)?;
    Ok((tr.final_best, tr.steps.len(), tr.fes))
}

/// Runs `method` `opts.runs` times on every instance. Run `k` of the
/// instance at position `i` uses the seed derived from `(seed, i, k)`, so
/// results do not depend on the worker count.
pub fn evaluate(name: &str, method: &Method, instances: &[ProblemInstance], opts: &EvalOptions) -> Result<EvalResult> {
    let workflows: Vec<Option<Workflow>> = instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| instance_workflow(method, inst, i, opts.seed))
        .collect();
    let baselines: Vec<f64> = instances.par_iter().map(|inst| random_search_baseline(inst, opts.seed)).collect();
    let jobs: Vec<(usize, usize)> = (0..instances.len()).flat_map(|i| (0..opts.runs).map(move |k| (i, k))).collect();
    let outcomes: Vec<Result<RunRecord>> = jobs
        .par_iter()
        .map(|&(i, k)| {
            let inst = &instances[i];
            let seed = rng::derive_path(opts.seed, &[i as u64, k as u64]);
            let (best, generations, fes) = one_run(method, workflows[i].as_ref(), inst, seed, opts)?;
            let n = normalize_objective(best, baselines[i]);
            Ok(RunRecord {
                schema_version: SCHEMA_VERSION,
                instance: inst.id,
                run: k,
                final_best: best,
                random_search: baselines[i],
                normalized: n.value,
                degenerate: n.degenerate,
                generations,
                fes,
            })
        })
        .collect();
    let runs = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let summaries = instances
        .iter()
        .zip(&workflows)
        .enumerate()
        .map(|(i, (inst, wf))| {
            let vals: Vec<f64> = runs[i * opts.runs..(i + 1) * opts.runs].iter().map(|r| r.normalized).collect();
            let (mean, std) = mean_std(&vals);
            InstanceSummary {
                instance: inst.id,
                hash: inst.hash().to_string(),
                workflow: wf.as_ref().map(|w| w.names().iter().map(|s| s.to_string()).collect()).unwrap_or_default(),
                n_nich: wf.as_ref().filter(|w| !w.branches().is_empty()).map(|w| w.n_nich()).unwrap_or(0),
                mean,
                std,
            }
        })
        .collect();
    let all: Vec<f64> = runs.iter().map(|r| r.normalized).collect();
    let (mean, std) = mean_std(&all);
    Ok(EvalResult {
        schema_version: SCHEMA_VERSION,
        method: name.to_string(),
        seed: opts.seed,
        runs_per_instance: opts.runs,
        instances: summaries,
        runs,
        mean,
        std,
    })
}

/// Loads a checkpoint, refusing one whose shape differs from `model`, and
/// evaluates both of its agents.
pub fn evaluate_checkpoint(
    path: &Path,
    model: &ModelConfig,
    instances: &[ProblemInstance],
    opts: &EvalOptions,
    decode: Decode,
) -> Result<EvalResult> {
    let ck = Checkpoint::load_expecting(path, model)?;
    let method = Method::Agents { composer: &ck.composer, controller: Some(&ck.controller), decode, zero_features: false };
    evaluate("checkpoint", &method, instances, opts)
}
