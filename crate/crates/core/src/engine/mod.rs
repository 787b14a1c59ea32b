//! Workflow interpreter: runs a module sequence on a problem instance one
//! generation at a time.

pub mod ops;
pub mod update;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::progress::{progress_features, ProgressContext, PROGRESS_DIM};
use crate::problem::ProblemInstance;
use crate::rng::{self, tag, Rng};
use crate::space::{
    crossover_space, mutation_space, registry, update_space, ConfigSpace, CrossoverOp, DefaultValue, InitOp,
    ModuleVariant, MutationOp, NichingOp, Op, ParamRole, RestartOp, UpdateOp, Workflow,
};
use ops::{Mat, Params, PopView, Source};
use update::{EsState, SwarmState};

/// Smallest subpopulation size population reduction may reach.
pub const NP_MIN: usize = 4;

/// Default initial population size for a problem dimension.
pub fn initial_population_size(dim: usize) -> usize {
    if dim <= 20 {
        100
    } else {
        ((4.0 + 3.0 * (dim as f64).ln() * 10.0).round() as usize).min(170)
    }
}

/// Bin index of a `[0, 1]` selector value among `n` choices.
pub fn quantize(v: f64, n: usize) -> usize {
    ((v * n as f64).floor().max(0.0) as usize).min(n - 1)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EngineOptions {
    /// Overrides the dimension-based initial population size.
    pub np_init: Option<usize>,
}

/// One subpopulation with its optimizer state.
#[derive(Debug, Clone)]
pub struct Subpop {
    pub x: Mat,
    pub f: Vec<f64>,
    pub archive: Mat,
    pub archive_f: Vec<f64>,
    pub swarm: Option<SwarmState>,
    pub es: Option<EsState>,
    /// Size at the last (re)initialization, the reduction ceiling.
    pub np_max: usize,
    pub best: f64,
    pub stagnation: usize,
    pub since_start: usize,
}

impl Subpop {
    fn new(x: Mat, f: Vec<f64>) -> Self {
        let best = f.iter().cloned().fold(f64::INFINITY, f64::min);
        let np_max = x.len();
        Self {
            x,
            f,
            archive: Vec::new(),
            archive_f: Vec::new(),
            swarm: None,
            es: None,
            np_max,
            best,
            stagnation: 0,
            since_start: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    fn push_archive(&mut self, x: Vec<f64>, f: f64, rng: &mut Rng) {
        let cap = self.x.len();
        if cap == 0 {
            return;
        }
        if self.archive.len() < cap {
            self.archive.push(x);
            self.archive_f.push(f);
        } else {
            let k = rng.random_range(0..self.archive.len());
            self.archive[k] = x;
            self.archive_f[k] = f;
        }
    }

    fn trim_archive(&mut self, rng: &mut Rng) {
        while self.archive.len() > self.x.len() {
            let k = rng.random_range(0..self.archive.len());
            self.archive.swap_remove(k);
            self.archive_f.swap_remove(k);
        }
    }

    /// Keeps the listed slots, in the listed order.
    fn retain(&mut self, keep: &[usize]) {
        self.x = keep.iter().map(|&i| self.x[i].clone()).collect();
        self.f = keep.iter().map(|&i| self.f[i]).collect();
        if let Some(s) = &mut self.swarm {
            s.vel = keep.iter().map(|&i| s.vel[i].clone()).collect();
            s.pbest = keep.iter().map(|&i| s.pbest[i].clone()).collect();
            s.pbest_f = keep.iter().map(|&i| s.pbest_f[i]).collect();
        }
    }
}

/// Whether a restart trigger fires for a subpopulation.
pub fn restart_triggered(op: RestartOp, sp: &Subpop, diameter: f64) -> bool {
    if sp.since_start == 0 || sp.len() < 2 {
        return false;
    }
    let obj_spread = |frac: f64| {
        let n = ((frac * sp.len() as f64).ceil() as usize).clamp(2, sp.len());
        let order = ops::ranking(&sp.f);
        sp.f[order[n - 1]] - sp.f[order[0]]
    };
    let max_pair = || {
        let mut m = 0.0f64;
        for i in 0..sp.len() {
            for j in i + 1..sp.len() {
                m = m.max(ops::dist(&sp.x[i], &sp.x[j]));
            }
        }
        m
    };
    match op {
        RestartOp::Stagnation => sp.stagnation >= 100,
        RestartOp::ObjConvergence => obj_spread(0.2) < 1e-16,
        RestartOp::SolutionConvergence => max_pair() < 1e-16 * diameter,
        RestartOp::ObjSolutionConvergence => obj_spread(1.0) < 1e-8 && max_pair() < 0.005 * diameter,
    }
}

/// Replaces the worst member of `subpops[current]` by the best member of
/// `subpops[target]`.
pub fn share_best(subpops: &mut [Subpop], current: usize, target: usize) {
    let b = ops::argmin(&subpops[target].f);
    let (bx, bf) = (subpops[target].x[b].clone(), subpops[target].f[b]);
    let cur = &mut subpops[current];
    let w = ops::ranking(&cur.f)[cur.len() - 1];
    if bf > cur.f[w] {
        return;
    }
    cur.x[w] = bx;
    cur.f[w] = bf;
    if let Some(s) = &mut cur.swarm {
        s.vel[w].iter_mut().for_each(|v| *v = 0.0);
        s.pbest[w].clone_from(&cur.x[w]);
        s.pbest_f[w] = bf;
    }
}

/// Live state of one episode.
#[derive(Debug, Clone)]
pub struct RunState {
    pub subpops: Vec<Subpop>,
    pub fes: usize,
    pub max_fes: usize,
    pub generation: usize,
    pub best_f: f64,
    pub best_x: Vec<f64>,
    /// Best objective right after initialization.
    pub f0: f64,
    pub f_star: f64,
    pub lb: f64,
    pub ub: f64,
    pub dim: usize,
    pub warnings: Vec<String>,
}

impl RunState {
    pub fn diameter(&self) -> f64 {
        (self.ub - self.lb) * (self.dim as f64).sqrt()
    }

    pub fn population_size(&self) -> usize {
        self.subpops.iter().map(Subpop::len).sum()
    }

    fn warn(&mut self, msg: &str) {
        if !self.warnings.iter().any(|w| w == msg) {
            self.warnings.push(msg.to_string());
        }
    }

    /// Evaluates as many rows of `xs` as the budget allows.
    fn evaluate(&mut self, inst: &ProblemInstance, xs: &[Vec<f64>]) -> Vec<f64> {
        let k = xs.len().min(self.max_fes.saturating_sub(self.fes));
        let f: Vec<f64> = xs[..k].iter().map(|x| inst.eval(x)).collect();
        self.fes += k;
        for (x, &v) in xs.iter().zip(&f) {
            if v < self.best_f {
                self.best_f = v;
                self.best_x.clone_from(x);
            }
        }
        f
    }

    fn progress_context(&self) -> ProgressContext {
        ProgressContext {
            f0: self.f0,
            f_star: self.f_star,
            lb: self.lb,
            ub: self.ub,
            dim: self.dim,
            fes: self.fes,
            max_fes: self.max_fes,
        }
    }

    /// Progress features of one subpopulation, or of the whole population.
    pub fn progress(&self, subpop: Option<usize>) -> [f64; PROGRESS_DIM] {
        let all_x: Vec<&[f64]> = self.subpops.iter().flat_map(|s| s.x.iter().map(|v| v.as_slice())).collect();
        let all_f: Vec<f64> = self.subpops.iter().flat_map(|s| s.f.iter().copied()).collect();
        let ctx = self.progress_context();
        match subpop {
            Some(k) => {
                let lx: Vec<&[f64]> = self.subpops[k].x.iter().map(|v| v.as_slice()).collect();
                progress_features(&lx, &self.subpops[k].f, &all_x, &all_f, &ctx)
            }
            None => progress_features(&all_x, &all_f, &all_x, &all_f, &ctx),
        }
    }
}

/// Parameter vectors for every controllable module, in workflow order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigAssignment(pub Vec<Vec<f64>>);

fn default_vector(space: &ConfigSpace, rng: &mut Rng) -> Vec<f64> {
    space
        .params
        .iter()
        .map(|p| match p.default {
            DefaultValue::Value(v) => v,
            DefaultValue::Random => p.lower + (p.upper - p.lower) * rng.random::<f64>(),
        })
        .collect()
}

impl ConfigAssignment {
    /// Default values; random defaults are drawn from `rng`.
    pub fn defaults(workflow: &Workflow, rng: &mut Rng) -> Self {
        let r = registry();
        Self(
            workflow
                .controllable_positions()
                .into_iter()
                .map(|p| default_vector(&r.get(workflow.tokens()[p]).config, rng))
                .collect(),
        )
    }

    /// Checks shape and bounds against `workflow`.
    pub fn validate(&self, workflow: &Workflow) -> Result<()> {
        let positions = workflow.controllable_positions();
        if self.0.len() != positions.len() {
            return Err(Error::Contract(format!(
                "{} controllable modules but {} config vectors",
                positions.len(),
                self.0.len()
            )));
        }
        for (v, &pos) in self.0.iter().zip(&positions) {
            let var = registry().get(workflow.tokens()[pos]);
            if v.len() != var.config.len() {
                return Err(Error::Contract(format!("{}: expected {} values, got {}", var.name, var.config.len(), v.len())));
            }
            for (x, p) in v.iter().zip(&var.config.params) {
                if !(x.is_finite() && *x >= p.lower - 1e-9 && *x <= p.upper + 1e-9) {
                    return Err(Error::Contract(format!("{}.{} = {x} outside [{}, {}]", var.name, p.name, p.lower, p.upper)));
                }
            }
        }
        Ok(())
    }
}

/// What a controller sees before choosing a configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub t: usize,
    /// Progress features for each controllable module, computed on the
    /// subpopulation the module acts on.
    pub per_module: Vec<[f64; PROGRESS_DIM]>,
    /// Progress features of the whole population.
    pub global: [f64; PROGRESS_DIM],
}

/// Learner bookkeeping attached to a decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub raw: Vec<f64>,
    pub log_prob: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub configs: ConfigAssignment,
    pub record: Option<ActionRecord>,
}

/// Supplies a configuration every generation.
pub trait Controller {
    fn decide(&mut self, workflow: &Workflow, obs: &Observation, rng: &mut Rng) -> Result<Decision>;
}

/// Registry defaults, with random defaults redrawn each generation.
#[derive(Debug, Clone, Copy, Default)]
pub struct DefaultController;

impl Controller for DefaultController {
    fn decide(&mut self, workflow: &Workflow, _obs: &Observation, rng: &mut Rng) -> Result<Decision> {
        Ok(Decision { configs: ConfigAssignment::defaults(workflow, rng), record: None })
    }
}

/// The same configuration every generation.
#[derive(Debug, Clone)]
pub struct FixedController(pub ConfigAssignment);

impl Controller for FixedController {
    fn decide(&mut self, _workflow: &Workflow, _obs: &Observation, _rng: &mut Rng) -> Result<Decision> {
        Ok(Decision { configs: self.0.clone(), record: None })
    }
}

/// Outcome of one generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub done: bool,
}

/// Module positions grouped by execution phase.
#[derive(Debug, Clone)]
struct Program {
    init: InitOp,
    niching: Option<NichingOp>,
    bodies: Vec<Vec<usize>>,
    tail: Vec<usize>,
}

impl Program {
    fn compile(workflow: &Workflow) -> Result<Self> {
        let r = registry();
        let ops: Vec<Op> = workflow.tokens().iter().map(|&t| r.get(t).op).collect();
        let Op::Init(init) = ops[0] else {
            return Err(Error::IllegalWorkflow("first module is not an initialization".into()));
        };
        let end = ops.len() - 1;
        let (niching, bodies, tail_start) = if let Op::Niching(n) = ops[1] {
            let bodies: Vec<Vec<usize>> = workflow.branches().iter().map(|b| (b.start..=b.end).collect()).collect();
            let last = workflow.branches().last().map_or(2, |b| b.end + 1);
            (Some(n), bodies, last)
        } else {
            let sel = ops
                .iter()
                .position(|o| matches!(o, Op::Selection(_)))
                .ok_or_else(|| Error::IllegalWorkflow("no selection module".into()))?;
            (None, vec![(1..=sel).collect()], sel + 1)
        };
        Ok(Self { init, niching, bodies, tail: (tail_start..end).collect() })
    }
}

fn uses_archive(workflow: &Workflow) -> bool {
    let mutation = |m: &MutationOp| matches!(m, MutationOp::CurrentToPbest1Archive | MutationOp::CurrentToRand1Archive);
    let crossover = |c: &CrossoverOp| *c == CrossoverOp::QbestBinomialArchive;
    workflow.tokens().iter().any(|&t| match registry().get(t).op {
        Op::Mutation(m) => mutation(&m),
        Op::MultiMutation(ms) => ms.iter().any(mutation),
        Op::Crossover(c) => crossover(&c),
        Op::MultiCrossover(cs) => cs.iter().any(crossover),
        _ => false,
    })
}

/// Named parameters of a module; multi-strategy modules also return the
/// chosen sub-operator index.
fn module_params(var: &ModuleVariant, values: &[f64], n_choices: usize, sub_space: impl Fn(usize) -> ConfigSpace) -> (usize, Params) {
    let mut choice = 0;
    let mut out = Vec::new();
    for (p, &v) in var.config.params.iter().zip(values) {
        if p.role == ParamRole::OperatorSelector {
            choice = quantize(v, n_choices);
        } else {
            out.push((p.name, v));
        }
    }
    if var.is_multi_strategy() {
        for p in sub_space(choice).params {
            if !out.iter().any(|(n, _)| *n == p.name) {
                if let DefaultValue::Value(v) = p.default {
                    out.push((p.name, v));
                }
            }
        }
    }
    (choice, Params(out))
}

/// One running episode.
pub struct Episode<'a> {
    workflow: Workflow,
    program: Program,
    instance: &'a ProblemInstance,
    state: RunState,
    rng: Rng,
    archive: bool,
    done: bool,
    t: usize,
}

impl<'a> Episode<'a> {
    /// Initializes (and partitions) the population; consumes FEs.
    pub fn new(workflow: &Workflow, instance: &'a ProblemInstance, seed: u64, opts: &EngineOptions) -> Result<Self> {
        let program = Program::compile(workflow)?;
        let mut rng = rng::stream(seed, tag::ENGINE);
        let (dim, lb, ub, max_fes) = (instance.dim(), instance.lb(), instance.ub(), instance.max_fes());
        if max_fes == 0 {
            return Err(Error::EpisodeFinished);
        }
        let np = opts.np_init.unwrap_or_else(|| initial_population_size(dim)).min(max_fes).max(1);
        let mut state = RunState {
            subpops: Vec::new(),
            fes: 0,
            max_fes,
            generation: 0,
            best_f: f64::INFINITY,
            best_x: vec![0.0; dim],
            f0: f64::INFINITY,
            f_star: instance.f_star(),
            lb,
            ub,
            dim,
            warnings: Vec::new(),
        };
        let x = ops::initialize(program.init, np, dim, lb, ub, &mut rng);
        let f = state.evaluate(instance, &x);
        state.f0 = state.best_f;
        let mut program = program;
        match program.niching {
            Some(op) if np >= NP_MIN * workflow.n_nich() => {
                let groups = ops::niche(op, &x, &f, workflow.n_nich(), &mut rng);
                state.subpops = groups
                    .into_iter()
                    .map(|g| Subpop::new(g.iter().map(|&i| x[i].clone()).collect(), g.iter().map(|&i| f[i]).collect()))
                    .collect();
            }
            Some(_) => {
                state.warn("population too small for niching; running the first branch on the whole population");
                program.bodies.truncate(1);
                state.subpops = vec![Subpop::new(x, f)];
            }
            None => state.subpops = vec![Subpop::new(x, f)],
        }
        let done = state.fes >= max_fes;
        Ok(Self { workflow: workflow.clone(), program, instance, state, rng, archive: uses_archive(workflow), done, t: 0 })
    }

    pub fn state(&self) -> &RunState {
        &self.state
    }

    pub fn workflow(&self) -> &Workflow {
        &self.workflow
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn generation(&self) -> usize {
        self.t
    }

    pub fn observation(&self) -> Observation {
        let niched = self.state.subpops.len() > 1;
        let per_module = self
            .workflow
            .controllable_positions()
            .into_iter()
            .map(|p| {
                let local = if niched { self.workflow.branch_of(p) } else { None };
                self.state.progress(local)
            })
            .collect();
        Observation { t: self.t, per_module, global: self.state.progress(None) }
    }

    /// Runs one generation under `configs`.
    pub fn step(&mut self, configs: &ConfigAssignment) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::EpisodeFinished);
        }
        configs.validate(&self.workflow)?;
        let positions = self.workflow.controllable_positions();
        let prev = self.state.best_f;
        let bodies = self.program.bodies.clone();
        for (b, body) in bodies.iter().enumerate() {
            if self.state.fes >= self.state.max_fes {
                break;
            }
            self.run_body(b, body, configs, &positions);
        }
        for sp in &mut self.state.subpops {
            let best = sp.f.iter().cloned().fold(f64::INFINITY, f64::min);
            if sp.best - best <= 1e-10 {
                sp.stagnation += 1;
            } else {
                sp.stagnation = 0;
            }
            sp.best = sp.best.min(best);
            sp.since_start += 1;
        }
        for pos in self.program.tail.clone() {
            match registry().get(self.workflow.tokens()[pos]).op {
                Op::Reduction(op) => self.reduce(op),
                Op::Restart(op) => self.restart(op),
                _ => {}
            }
        }
        self.state.generation += 1;
        self.t += 1;
        self.done = self.state.fes >= self.state.max_fes;
        let gap = self.state.f0 - self.state.f_star;
        let reward = if gap > 0.0 { (prev - self.state.best_f) / gap } else { 0.0 };
        Ok(StepOutcome { reward, done: self.done })
    }

    fn run_body(&mut self, b: usize, body: &[usize], configs: &ConfigAssignment, positions: &[usize]) {
        let config_at = |pos: usize| -> &[f64] {
            let k = positions.iter().position(|&p| p == pos).expect("controllable position");
            &configs.0[k]
        };
        let r = registry();
        let (lb, ub) = (self.state.lb, self.state.ub);
        let mut off: Option<Mat> = None;
        let mut off_f: Vec<f64> = Vec::new();
        let mut degenerate = false;
        for &pos in body {
            let var = r.get(self.workflow.tokens()[pos]);
            match var.op {
                Op::Mutation(_) | Op::MultiMutation(_) => {
                    let (op, params) = match var.op {
                        Op::MultiMutation(list) => {
                            let (k, p) = module_params(var, config_at(pos), list.len(), |k| mutation_space(list[k]));
                            (list[k], p)
                        }
                        Op::Mutation(m) => (m, module_params(var, config_at(pos), 1, |_| ConfigSpace::default()).1),
                        _ => unreachable!(),
                    };
                    let ga = matches!(op, MutationOp::Gaussian | MutationOp::Polynomial);
                    let sp = &self.state.subpops[b];
                    let base = if ga { off.as_deref().unwrap_or(&sp.x) } else { &sp.x };
                    let view = PopView { x: base, f: &sp.f, archive: &sp.archive, archive_f: &sp.archive_f, lb, ub };
                    off = Some(ops::mutate(op, &view, &params, &mut self.rng, &mut degenerate));
                }
                Op::Crossover(_) | Op::MultiCrossover(_) => {
                    let (op, params) = match var.op {
                        Op::MultiCrossover(list) => {
                            let (k, p) = module_params(var, config_at(pos), list.len(), |k| crossover_space(list[k]));
                            (list[k], p)
                        }
                        Op::Crossover(c) => (c, module_params(var, config_at(pos), 1, |_| ConfigSpace::default()).1),
                        _ => unreachable!(),
                    };
                    let sp = &self.state.subpops[b];
                    let view = PopView { x: &sp.x, f: &sp.f, archive: &sp.archive, archive_f: &sp.archive_f, lb, ub };
                    let trials = off.as_ref().unwrap_or(&sp.x);
                    off = Some(ops::crossover(op, &view, Some(trials), &params, &mut self.rng));
                }
                Op::Update(_) | Op::MultiUpdate(_) => {
                    let (op, params) = match var.op {
                        Op::MultiUpdate(list) => {
                            let (k, p) = module_params(var, config_at(pos), list.len(), |k| update_space(list[k]));
                            (list[k], p)
                        }
                        Op::Update(u) => (u, module_params(var, config_at(pos), 1, |_| ConfigSpace::default()).1),
                        _ => unreachable!(),
                    };
                    off = Some(self.apply_update(b, op, &params));
                }
                Op::Boundary(op) => {
                    let mut x = off.take().unwrap_or_else(|| self.state.subpops[b].x.clone());
                    ops::repair(op, &mut x, &self.state.subpops[b].x, lb, ub, &mut self.rng);
                    off_f = self.state.evaluate(self.instance, &x);
                    off = Some(x);
                }
                Op::Selection(op) => {
                    let o = off.take().unwrap_or_default();
                    let sp = &self.state.subpops[b];
                    let src = ops::select(op, &sp.x, &sp.f, &o, &off_f, &mut self.rng);
                    self.apply_selection(b, &src, &o, &off_f);
                    off_f.clear();
                }
                Op::Sharing => {
                    let n = self.state.subpops.len();
                    if n > 1 {
                        let target = quantize(config_at(pos)[0], n);
                        share_best(&mut self.state.subpops, b, target);
                    }
                }
                _ => {}
            }
        }
        if degenerate {
            self.state.warn("population too small for distinct DE indices; sampled with replacement");
        }
    }

    fn apply_update(&mut self, b: usize, op: UpdateOp, params: &Params) -> Mat {
        let (lb, ub) = (self.state.lb, self.state.ub);
        let sp = &mut self.state.subpops[b];
        match EsState::kind_of(op) {
            None => {
                if sp.swarm.is_none() {
                    sp.swarm = Some(SwarmState::fresh(&sp.x, &sp.f));
                }
                update::swarm_step(op, &sp.x, &sp.f, sp.swarm.as_mut().unwrap(), params, &mut self.rng)
            }
            Some(kind) => {
                match &mut sp.es {
                    Some(es) if es.kind == kind => {
                        es.update(&sp.x, &sp.f, params.get("cc"), params.get("cs"), ub - lb);
                    }
                    _ => {
                        let n = sp.x.len() as f64;
                        let mean: Vec<f64> = (0..self.state.dim).map(|j| sp.x.iter().map(|v| v[j]).sum::<f64>() / n).collect();
                        sp.es = Some(EsState::new(kind, mean, 0.3 * (ub - lb)));
                    }
                }
                sp.es.as_ref().unwrap().sample(sp.x.len(), &mut self.rng)
            }
        }
    }

    fn apply_selection(&mut self, b: usize, src: &[Source], off: &[Vec<f64>], off_f: &[f64]) {
        let sp = &mut self.state.subpops[b];
        let pick = |s: &Source| match *s {
            Source::Parent(i) => (sp.x[i].clone(), sp.f[i]),
            Source::Offspring(i) => (off[i].clone(), off_f[i]),
        };
        let (nx, nf): (Mat, Vec<f64>) = src.iter().map(pick).unzip();
        if self.archive {
            let mut kept = vec![false; sp.len()];
            for s in src {
                if let Source::Parent(i) = *s {
                    kept[i] = true;
                }
            }
            for i in 0..sp.len() {
                if !kept[i] {
                    let (x, f) = (sp.x[i].clone(), sp.f[i]);
                    sp.push_archive(x, f, &mut self.rng);
                }
            }
        }
        if let Some(s) = &mut sp.swarm {
            let slot = |s: &Source| match *s {
                Source::Parent(i) | Source::Offspring(i) => i,
            };
            s.vel = src.iter().map(|v| s.vel[slot(v)].clone()).collect();
            s.pbest = src.iter().map(|v| s.pbest[slot(v)].clone()).collect();
            s.pbest_f = src.iter().map(|v| s.pbest_f[slot(v)]).collect();
            s.record(&nx, &nf);
        }
        sp.x = nx;
        sp.f = nf;
    }

    fn reduce(&mut self, op: crate::space::ReductionOp) {
        let progress = self.state.fes as f64 / self.state.max_fes as f64;
        for sp in &mut self.state.subpops {
            let target = ops::reduced_size(op, sp.np_max, NP_MIN, progress);
            if target < sp.len() {
                let keep: Vec<usize> = ops::ranking(&sp.f).into_iter().take(target).collect();
                sp.retain(&keep);
                sp.trim_archive(&mut self.rng);
            }
        }
    }

    fn restart(&mut self, op: RestartOp) {
        let diameter = self.state.diameter();
        for b in 0..self.state.subpops.len() {
            if self.state.fes >= self.state.max_fes {
                return;
            }
            if !restart_triggered(op, &self.state.subpops[b], diameter) {
                continue;
            }
            let np = self.state.subpops[b].len();
            let fresh = ops::initialize(self.program.init, np, self.state.dim, self.state.lb, self.state.ub, &mut self.rng);
            let f = self.state.evaluate(self.instance, &fresh);
            let sp = &mut self.state.subpops[b];
            let mut x = sp.x.clone();
            let mut fv = sp.f.clone();
            for (i, v) in f.iter().enumerate() {
                x[i].clone_from(&fresh[i]);
                fv[i] = *v;
            }
            *sp = Subpop::new(x, fv);
        }
    }
}

/// Per-generation record of an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub fes: usize,
    pub f_best: f64,
    pub obs: Observation,
    pub configs: ConfigAssignment,
    pub r_t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<ActionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<StepRecord>,
    pub f0: f64,
    pub f_star: f64,
    pub final_best: f64,
    pub fes: usize,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.r_t).collect()
    }

    /// One JSON object per generation.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&serde_json::to_string(s).expect("serializable record"));
            out.push('\n');
        }
        out
    }
}

/// Runs `workflow` on `instance` until the budget is spent.
pub fn run_episode(
    workflow: &Workflow,
    instance: &ProblemInstance,
    controller: &mut dyn Controller,
    seed: u64,
    opts: &EngineOptions,
) -> Result<Trajectory> {
    let mut ep = Episode::new(workflow, instance, seed, opts)?;
    let mut crng = rng::stream(seed, tag::CONTROLLER);
    let mut steps = Vec::new();
    while !ep.is_done() {
        let obs = ep.observation();
        let decision = controller.decide(workflow, &obs, &mut crng)?;
        let out = ep.step(&decision.configs)?;
        steps.push(StepRecord {
            t: obs.t,
            fes: ep.state.fes,
            f_best: ep.state.best_f,
            obs,
            configs: decision.configs,
            r_t: out.reward,
            action: decision.record,
        });
    }
    Ok(Trajectory {
        steps,
        f0: ep.state.f0,
        f_star: ep.state.f_star,
        final_best: ep.state.best_f,
        fes: ep.state.fes,
        warnings: ep.state.warnings.clone(),
    })
}

/// The canonical DE workflow: uniform init, DE/rand/1, binomial, clip,
/// DE-like selection.
pub fn canonical_de() -> Workflow {
    named_workflow(&["Uniform", "DE/rand/1", "Binomial", "Clip", "DE-like", "end"])
}

/// Builds a workflow from variant names; panics on unknown names.
pub fn named_workflow(names: &[&str]) -> Workflow {
    let r = registry();
    let tokens = names
        .iter()
        .map(|n| r.token_by_name(n).unwrap_or_else(|| panic!("unknown module {n}")))
        .collect();
    Workflow::from_tokens(tokens, None).expect("legal workflow")
}

#[cfg(test)]
mod tests;
