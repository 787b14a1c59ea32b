//! Synthetic problem instances built from shifted, rotated basic functions.

mod baseline;
pub mod functions;

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use baseline::{normalize_objective, random_search_baseline, random_search_min, Normalized};
pub use functions::{BasicFunction, Conditioning, GlobalStructure, Modality, Peaks, ALL_FUNCTIONS};

use crate::error::{Error, Result};
use crate::rng::{self, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Single,
    Composition,
    Hybrid,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Single, Mode::Composition, Mode::Hybrid];
}

pub const DIMENSIONS: [usize; 4] = [5, 10, 20, 50];
pub const HALF_WIDTHS: [f64; 4] = [5.0, 10.0, 20.0, 50.0];
pub const BUDGETS: [usize; 5] = [10_000, 20_000, 30_000, 40_000, 50_000];
pub const MIN_COMPONENTS: usize = 2;
pub const MAX_COMPONENTS: usize = 5;

/// Menus the generator samples from. Narrowing a menu to one entry pins
/// that field without disturbing the streams of the others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenOptions {
    pub mode: Option<Mode>,
    pub dims: Vec<usize>,
    /// Symmetric bounds are `[-h, h]` for each listed half width `h`.
    pub half_widths: Vec<f64>,
    pub budgets: Vec<usize>,
    pub functions: Vec<BasicFunction>,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions {
            mode: None,
            dims: DIMENSIONS.to_vec(),
            half_widths: HALF_WIDTHS.to_vec(),
            budgets: BUDGETS.to_vec(),
            functions: ALL_FUNCTIONS.to_vec(),
        }
    }
}

impl GenOptions {
    pub fn single(f: BasicFunction, dim: usize, half_width: f64, budget: usize) -> Self {
        GenOptions {
            mode: Some(Mode::Single),
            dims: vec![dim],
            half_widths: vec![half_width],
            budgets: vec![budget],
            functions: vec![f],
        }
    }

    fn check(&self) -> Result<()> {
        if self.dims.is_empty() || self.half_widths.is_empty() || self.budgets.is_empty() || self.functions.is_empty() {
            return Err(Error::Config("generator menus must be non-empty".into()));
        }
        if self.dims.contains(&0) || self.half_widths.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::Config("dimensions and half widths must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub id: usize,
    pub seed: u64,
    mode: Mode,
    components: Vec<BasicFunction>,
    weights: Vec<f64>,
    segments: Vec<Vec<usize>>,
    shift: Vec<f64>,
    /// Column-major orthogonal matrix.
    rotation: DMatrix<f64>,
    lb: f64,
    ub: f64,
    max_fes: usize,
    f_star: f64,
    f_star_exact: bool,
    peaks: Vec<Option<Arc<Peaks>>>,
    hash: String,
}

impl PartialEq for ProblemInstance {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.hash == other.hash
    }
}

impl ProblemInstance {
    /// Assembles an instance from explicit parts. `weights` is used in
    /// composition mode and `segments` (0-based indices) in hybrid mode.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        id: usize,
        seed: u64,
        mode: Mode,
        components: Vec<BasicFunction>,
        weights: Vec<f64>,
        segments: Vec<Vec<usize>>,
        shift: Vec<f64>,
        rotation: DMatrix<f64>,
        bounds: (f64, f64),
        max_fes: usize,
    ) -> Result<Self> {
        let d = shift.len();
        if d == 0 || rotation.nrows() != d || rotation.ncols() != d {
            return Err(Error::Contract("rotation must be D x D with D > 0".into()));
        }
        let n = components.len();
        match mode {
            Mode::Single if n != 1 => return Err(Error::Contract("single mode takes one component".into())),
            Mode::Composition => {
                if n < 1 || weights.len() != n || weights.iter().any(|&w| !(w > 0.0 && w <= 1.0)) {
                    return Err(Error::Contract("composition weights must lie in (0, 1], one per component".into()));
                }
            }
            Mode::Hybrid => {
                if segments.len() != n {
                    return Err(Error::Contract("one segment per hybrid component".into()));
                }
                let mut seen = vec![false; d];
                for s in &segments {
                    if s.is_empty() {
                        return Err(Error::Contract("empty hybrid segment".into()));
                    }
                    for &i in s {
                        if i >= d || seen[i] {
                            return Err(Error::Contract("hybrid segments must partition the dimensions".into()));
                        }
                        seen[i] = true;
                    }
                }
                if seen.iter().any(|s| !s) {
                    return Err(Error::Contract("hybrid segments must partition the dimensions".into()));
                }
            }
            _ => {}
        }
        let peaks = components
            .iter()
            .enumerate()
            .map(|(k, f)| {
                let dim = if mode == Mode::Hybrid { segments[k].len() } else { d };
                f.needs_peaks().then(|| Arc::new(Peaks::new(*f, dim)))
            })
            .collect();
        let mut inst = ProblemInstance {
            id,
            seed,
            mode,
            components,
            weights: if mode == Mode::Composition { weights } else { Vec::new() },
            segments: if mode == Mode::Hybrid { segments } else { Vec::new() },
            shift,
            rotation,
            lb: bounds.0,
            ub: bounds.1,
            max_fes,
            f_star: 0.0,
            f_star_exact: true,
            peaks,
            hash: String::new(),
        };
        inst.f_star = inst.eval(&inst.shift.clone());
        inst.f_star_exact = inst.components.iter().all(|f| f.optimum_exact());
        inst.hash = inst.content_hash();
        Ok(inst)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }
    pub fn components(&self) -> &[BasicFunction] {
        &self.components
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn segments(&self) -> &[Vec<usize>] {
        &self.segments
    }
    pub fn shift(&self) -> &[f64] {
        &self.shift
    }
    pub fn rotation(&self) -> &DMatrix<f64> {
        &self.rotation
    }
    pub fn dim(&self) -> usize {
        self.shift.len()
    }
    pub fn lb(&self) -> f64 {
        self.lb
    }
    pub fn ub(&self) -> f64 {
        self.ub
    }
    pub fn max_fes(&self) -> usize {
        self.max_fes
    }
    pub fn f_star(&self) -> f64 {
        self.f_star
    }
    /// False when some component's optimum is only tabulated to finite
    /// precision.
    pub fn f_star_exact(&self) -> bool {
        self.f_star_exact
    }
    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// Same instance with a different evaluation budget.
    pub fn with_max_fes(mut self, max_fes: usize) -> Self {
        self.max_fes = max_fes;
        self.hash = self.content_hash();
        self
    }

    /// `M^T (x - o)`.
    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let diff: Vec<f64> = x.iter().zip(&self.shift).map(|(a, b)| a - b).collect();
        self.rotation
            .as_slice()
            .chunks_exact(d)
            .map(|col| col.iter().zip(&diff).map(|(m, v)| m * v).sum())
            .collect()
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: x.len() });
        }
        Ok(self.eval(x))
    }

    /// Evaluation without the dimension check.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let z = self.transform(x);
        match self.mode {
            Mode::Single => functions::evaluate(self.components[0], &z, self.peaks[0].as_ref()),
            Mode::Composition => self
                .components
                .iter()
                .zip(&self.weights)
                .zip(&self.peaks)
                .map(|((&f, &w), p)| w * functions::evaluate(f, &z, p.as_ref()))
                .sum(),
            Mode::Hybrid => self
                .components
                .iter()
                .zip(&self.segments)
                .zip(&self.peaks)
                .map(|((&f, seg), p)| {
                    let part: Vec<f64> = seg.iter().map(|&i| z[i]).collect();
                    functions::evaluate(f, &part, p.as_ref())
                })
                .sum(),
        }
    }

    pub fn record(&self) -> InstanceRecord {
        InstanceRecord {
            id: self.id,
            seed: self.seed,
            mode: self.mode,
            components: self.components.iter().map(|f| f.name().to_string()).collect(),
            weights: self.weights.clone(),
            segments: self.segments.clone(),
            dim: self.dim(),
            lb: self.lb,
            ub: self.ub,
            max_fes: self.max_fes,
            f_star: self.f_star,
            f_star_exact: self.f_star_exact,
            hash: self.hash.clone(),
        }
    }

    fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.id as u64).to_le_bytes());
        h.update(self.seed.to_le_bytes());
        h.update([self.mode as u8]);
        for f in &self.components {
            h.update([f.index() as u8]);
        }
        for v in self.weights.iter().chain(&self.shift).chain(self.rotation.as_slice()) {
            h.update(v.to_bits().to_le_bytes());
        }
        for s in &self.segments {
            h.update((s.len() as u64).to_le_bytes());
            for &i in s {
                h.update((i as u64).to_le_bytes());
            }
        }
        h.update(self.lb.to_bits().to_le_bytes());
        h.update(self.ub.to_bits().to_le_bytes());
        h.update((self.max_fes as u64).to_le_bytes());
        format!("{:x}", h.finalize())
    }
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal folded into `Q`.
pub fn random_rotation(d: usize, rng: &mut rng::Rng) -> DMatrix<f64> {
    let g = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Deterministic instance for `(id, seed)` under the given menus.
pub fn generate_instance(id: usize, seed: u64, opts: &GenOptions) -> Result<ProblemInstance> {
    opts.check()?;
    let mode = match opts.mode {
        Some(m) => m,
        None => *Mode::ALL.choose(&mut rng::stream(seed, tag::MODE)).unwrap(),
    };
    let d = *opts.dims.choose(&mut rng::stream(seed, tag::DIM)).unwrap();
    let h = *opts.half_widths.choose(&mut rng::stream(seed, tag::BOUNDS)).unwrap();
    let max_fes = *opts.budgets.choose(&mut rng::stream(seed, tag::FES)).unwrap();

    let mut crng = rng::stream(seed, tag::COMPONENTS);
    let n = match mode {
        Mode::Single => 1,
        Mode::Composition => crng.random_range(MIN_COMPONENTS..=MAX_COMPONENTS),
        Mode::Hybrid => crng.random_range(MIN_COMPONENTS..=MAX_COMPONENTS).min(d),
    };
    let components: Vec<BasicFunction> = (0..n).map(|_| *opts.functions.choose(&mut crng).unwrap()).collect();

    let mut wrng = rng::stream(seed, tag::WEIGHTS);
    let weights: Vec<f64> = match mode {
        Mode::Composition => (0..n).map(|_| 1.0 - wrng.random::<f64>()).collect(),
        _ => Vec::new(),
    };

    let segments = match mode {
        Mode::Hybrid => {
            let mut srng = rng::stream(seed, tag::SEGMENTS);
            let mut perm: Vec<usize> = (0..d).collect();
            perm.shuffle(&mut srng);
            let mut cuts: Vec<usize> = rand::seq::index::sample(&mut srng, d - 1, n - 1)
                .into_iter()
                .map(|c| c + 1)
                .collect();
            cuts.sort_unstable();
            let mut bounds = vec![0];
            bounds.extend(cuts);
            bounds.push(d);
            bounds.windows(2).map(|w| perm[w[0]..w[1]].to_vec()).collect()
        }
        _ => Vec::new(),
    };

    let mut orng = rng::stream(seed, tag::SHIFT);
    let shift: Vec<f64> = (0..d).map(|_| orng.random_range(-0.8 * h..0.8 * h)).collect();
    let rotation = random_rotation(d, &mut rng::stream(seed, tag::ROTATION));
    ProblemInstance::from_parts(id, seed, mode, components, weights, segments, shift, rotation, (-h, h), max_fes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone)]
pub struct ProblemSet {
    pub split: Split,
    pub seed: u64,
    pub instances: Vec<ProblemInstance>,
}

impl ProblemSet {
    pub fn len(&self) -> usize {
        self.instances.len()
    }
    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

/// Per-instance seed inside a set.
pub fn instance_seed(set_seed: u64, index: usize) -> u64 {
    rng::derive_path(set_seed, &[tag::INSTANCE, index as u64])
}

/// Generates `n` instances and splits them into train and test sets.
pub fn generate_set(n: usize, seed: u64, test_fraction: f64, opts: &GenOptions) -> Result<(ProblemSet, ProblemSet)> {
    if n < 2 {
        return Err(Error::Contract("a problem set needs at least two instances".into()));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Contract("test fraction must lie in (0, 1)".into()));
    }
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, tag::SPLIT));
    let mut test_ids = order[..n_test].to_vec();
    let mut train_ids = order[n_test..].to_vec();
    test_ids.sort_unstable();
    train_ids.sort_unstable();
    let build = |ids: &[usize]| -> Result<Vec<ProblemInstance>> {
        ids.iter().map(|&i| generate_instance(i, instance_seed(seed, i), opts)).collect()
    };
    Ok((
        ProblemSet { split: Split::Train, seed, instances: build(&train_ids)? },
        ProblemSet { split: Split::Test, seed, instances: build(&test_ids)? },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: usize,
    pub seed: u64,
    pub mode: Mode,
    pub components: Vec<String>,
    pub weights: Vec<f64>,
    pub segments: Vec<Vec<usize>>,
    pub dim: usize,
    pub lb: f64,
    pub ub: f64,
    pub max_fes: usize,
    pub f_star: f64,
    pub f_star_exact: bool,
    pub hash: String,
}

/// Serializable description of a generated train/test pair. Shifts and
/// rotations are not stored; they are re-derived from the seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub test_fraction: f64,
    pub options: GenOptions,
    pub train: Vec<InstanceRecord>,
    pub test: Vec<InstanceRecord>,
}

impl Manifest {
    pub fn new(seed: u64, test_fraction: f64, options: GenOptions, train: &ProblemSet, test: &ProblemSet) -> Self {
        Manifest {
            seed,
            test_fraction,
            options,
            train: train.instances.iter().map(|i| i.record()).collect(),
            test: test.instances.iter().map(|i| i.record()).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Manifest(e.to_string()))
    }

    /// Rebuilds both sets and checks every content hash.
    pub fn instantiate(&self) -> Result<(ProblemSet, ProblemSet)> {
        let build = |recs: &[InstanceRecord], split| -> Result<ProblemSet> {
            let instances = recs
                .iter()
                .map(|r| {
                    let inst = generate_instance(r.id, r.seed, &self.options)?;
                    if inst.hash != r.hash {
                        return Err(Error::Manifest(format!("instance {} does not match its hash", r.id)));
                    }
                    Ok(inst.with_max_fes(r.max_fes))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ProblemSet { split, seed: self.seed, instances })
        };
        Ok((build(&self.train, Split::Train)?, build(&self.test, Split::Test)?))
    }
}
