//! The modular operator space.
//!
//! Every operator is a [`ModuleVariant`] with a 16-bit [`ModuleId`], a
//! [`ConfigSpace`] of tunable parameters and a [`TopologyRule`] naming the
//! module kinds that may legally follow it. The [`Registry`] is built once and
//! is immutable afterwards.

mod grammar;
mod workflow;

pub use grammar::{GenerationContext, Grammar};
pub use workflow::{shared_grammar, Branch, Workflow};

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of the token space seen by the workflow generator: registered
/// variants occupy the low indices, unregistered slots are permanently
/// masked, and the last index is the end token.
pub const TOKEN_SPACE: usize = 117;
pub const END_TOKEN: usize = TOKEN_SPACE - 1;
/// Maximum workflow length in tokens, end token included.
pub const MAX_WORKFLOW_LEN: usize = 64;
/// Maximum configuration size of any module.
pub const MAX_CONFIG: usize = 12;
pub const MIN_NICHES: usize = 2;
pub const MAX_NICHES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModuleKind {
    Initialization,
    Niching,
    BoundaryControl,
    Selection,
    RestartStrategy,
    PopulationReduction,
    Mutation,
    Crossover,
    OtherUpdate,
    InformationSharing,
    End,
}

impl ModuleKind {
    pub const FUNCTIONAL: [ModuleKind; 10] = [
        ModuleKind::Initialization,
        ModuleKind::Niching,
        ModuleKind::BoundaryControl,
        ModuleKind::Selection,
        ModuleKind::RestartStrategy,
        ModuleKind::PopulationReduction,
        ModuleKind::Mutation,
        ModuleKind::Crossover,
        ModuleKind::OtherUpdate,
        ModuleKind::InformationSharing,
    ];

    pub fn is_controllable(self) -> bool {
        matches!(
            self,
            ModuleKind::Mutation
                | ModuleKind::Crossover
                | ModuleKind::OtherUpdate
                | ModuleKind::InformationSharing
        )
    }

    /// Kind field of the id within its namespace.
    pub fn code(self) -> u8 {
        match self {
            ModuleKind::Initialization => 1,
            ModuleKind::Niching => 2,
            ModuleKind::BoundaryControl => 3,
            ModuleKind::Selection => 4,
            ModuleKind::RestartStrategy => 5,
            ModuleKind::PopulationReduction => 6,
            ModuleKind::End => 7,
            ModuleKind::Mutation => 1,
            ModuleKind::Crossover => 2,
            ModuleKind::OtherUpdate => 3,
            ModuleKind::InformationSharing => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModuleKind::Initialization => "Initialization",
            ModuleKind::Niching => "Niching",
            ModuleKind::BoundaryControl => "Boundary_Control",
            ModuleKind::Selection => "Selection",
            ModuleKind::RestartStrategy => "Restart_Strategy",
            ModuleKind::PopulationReduction => "Population_Reduction",
            ModuleKind::Mutation => "Mutation",
            ModuleKind::Crossover => "Crossover",
            ModuleKind::OtherUpdate => "Other_Update",
            ModuleKind::InformationSharing => "Information_Sharing",
            ModuleKind::End => "end",
        }
    }
}

/// Kind code shared by every multi-strategy variant in the controllable namespace.
pub const MULTI_STRATEGY_CODE: u8 = 4;

/// Algorithm family a reproduction operator belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Style {
    De,
    Ga,
    Pso,
    Es,
}

/// 16-bit module identifier: 1 controllable bit, 6 kind bits, 9 variant bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModuleId(u16);

impl ModuleId {
    pub fn encode(controllable: bool, kind: u8, variant: u16) -> Result<Self> {
        if !(1..=7).contains(&kind) {
            return Err(Error::Encoding(format!("kind index {kind} not in [1, 7]")));
        }
        if !(1..=511).contains(&variant) {
            return Err(Error::Encoding(format!("variant index {variant} not in [1, 511]")));
        }
        Ok(ModuleId(((controllable as u16) << 15) | ((kind as u16) << 9) | variant))
    }

    pub fn from_bits(bits: u16) -> Self {
        ModuleId(bits)
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    /// (controllable, kind index, variant index). Total over all 16-bit values.
    pub fn decode(self) -> (bool, u8, u16) {
        (self.0 >> 15 == 1, ((self.0 >> 9) & 0x3f) as u8, self.0 & 0x1ff)
    }

    /// Compact 16-character bit string, most significant bit first.
    pub fn bit_string(self) -> String {
        format!("{:016b}", self.0)
    }

    pub fn parse_bits(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| *c != '-').collect();
        if compact.len() != 16 || !compact.chars().all(|c| c == '0' || c == '1') {
            return Err(Error::Parse(format!("not a 16-bit id: {s:?}")));
        }
        u16::from_str_radix(&compact, 2)
            .map(ModuleId)
            .map_err(|e| Error::Parse(e.to_string()))
    }

    /// The id bits as a ±1 vector, most significant bit first.
    pub fn sign_vector(self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for (i, v) in out.iter_mut().enumerate() {
            *v = if (self.0 >> (15 - i)) & 1 == 1 { 1.0 } else { -1.0 };
        }
        out
    }
}

impl fmt::Display for ModuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (c, k, v) = self.decode();
        write!(f, "{}-{:06b}-{:09b}", c as u8, k, v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamRole {
    Continuous,
    OperatorSelector,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DefaultValue {
    Value(f64),
    /// Drawn uniformly from the bounds whenever a default is requested.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Param {
    pub name: &'static str,
    pub lower: f64,
    pub upper: f64,
    pub default: DefaultValue,
    pub role: ParamRole,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConfigSpace {
    pub params: Vec<Param>,
}

impl ConfigSpace {
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    fn check(&self, variant: &str) {
        assert!(self.len() <= MAX_CONFIG, "{variant}: config space too large");
        let selectors = self
            .params
            .iter()
            .filter(|p| p.role == ParamRole::OperatorSelector)
            .count();
        assert!(selectors <= 1, "{variant}: more than one operator selector");
        for p in &self.params {
            assert!(p.lower.is_finite() && p.upper.is_finite() && p.lower < p.upper);
            if let DefaultValue::Value(v) = p.default {
                assert!(v >= p.lower && v <= p.upper, "{variant}.{}: default outside bounds", p.name);
            }
        }
    }
}

/// One class of legal successor named by a topology rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Follower {
    Kind(ModuleKind),
    Styled(ModuleKind, Style),
    End,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Condition {
    NichingActive,
    NichingInactive,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TopologyRule {
    /// The printed "Legal followers" column.
    pub followers: Vec<Follower>,
    /// Followers that are legal only under a context condition.
    pub conditional: Vec<(Follower, Condition)>,
}

impl TopologyRule {
    pub fn end_eligible(&self) -> bool {
        self.followers.contains(&Follower::End)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InitOp {
    Uniform,
    Sobol,
    Lhs,
    Halton,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NichingOp {
    Random,
    Ranking,
    Distance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryOp {
    Clip,
    Random,
    Periodic,
    Reflect,
    Halving,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SelectionOp {
    DeLike,
    Crowding,
    PsoLike,
    Ranking,
    Tournament,
    Roulette,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RestartOp {
    Stagnation,
    ObjConvergence,
    SolutionConvergence,
    ObjSolutionConvergence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReductionOp {
    Linear,
    NonLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MutationOp {
    Rand1,
    Rand2,
    Best1,
    Best2,
    CurrentToBest1,
    CurrentToRand1,
    RandToBest1,
    CurrentToPbest1,
    CurrentToPbest1Archive,
    WeightedRandToPbest1,
    CurrentToRand1Archive,
    Gaussian,
    Polynomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CrossoverOp {
    Binomial,
    Exponential,
    QbestBinomial,
    QbestBinomialArchive,
    Sbx,
    Arithmetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UpdateOp {
    VanillaPso,
    FdrPso,
    Clpso,
    CmaEs,
    SepCmaEs,
    Mmes,
}

/// Executable semantics of a variant, consumed by the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Init(InitOp),
    Niching(NichingOp),
    Boundary(BoundaryOp),
    Selection(SelectionOp),
    Restart(RestartOp),
    Reduction(ReductionOp),
    Mutation(MutationOp),
    Crossover(CrossoverOp),
    Update(UpdateOp),
    Sharing,
    MultiMutation(&'static [MutationOp]),
    MultiCrossover(&'static [CrossoverOp]),
    MultiUpdate(&'static [UpdateOp]),
    End,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleVariant {
    pub id: ModuleId,
    pub kind: ModuleKind,
    pub style: Option<Style>,
    pub name: &'static str,
    pub config: ConfigSpace,
    pub rule: TopologyRule,
    pub op: Op,
}

impl ModuleVariant {
    pub fn is_controllable(&self) -> bool {
        self.kind.is_controllable()
    }

    pub fn is_multi_strategy(&self) -> bool {
        matches!(
            self.op,
            Op::MultiMutation(_) | Op::MultiCrossover(_) | Op::MultiUpdate(_)
        )
    }

    /// Whether `follower` names this variant.
    pub fn matches(&self, follower: Follower) -> bool {
        match follower {
            Follower::Kind(k) => self.kind == k,
            Follower::Styled(k, s) => self.kind == k && self.style == Some(s),
            Follower::End => self.kind == ModuleKind::End,
        }
    }
}

/// Immutable table of all registered variants, indexed by token.
#[derive(Debug)]
pub struct Registry {
    variants: Vec<ModuleVariant>,
    end: ModuleVariant,
    by_id: HashMap<u16, usize>,
}

static REGISTRY: OnceLock<Registry> = OnceLock::new();

/// The process-wide standard registry.
pub fn registry() -> &'static Registry {
    REGISTRY.get_or_init(Registry::standard)
}

impl Registry {
    pub fn standard() -> Self {
        let variants = standard_variants();
        let end = ModuleVariant {
            id: ModuleId::encode(false, ModuleKind::End.code(), 1).unwrap(),
            kind: ModuleKind::End,
            style: None,
            name: "end",
            config: ConfigSpace::default(),
            rule: TopologyRule::default(),
            op: Op::End,
        };
        assert!(variants.len() < END_TOKEN);
        let mut by_id = HashMap::new();
        for (i, v) in variants.iter().enumerate() {
            v.config.check(v.name);
            assert!(!v.rule.followers.is_empty(), "{}: empty topology rule", v.name);
            assert!(v.id.decode().2 >= 1);
            assert!(by_id.insert(v.id.bits(), i).is_none(), "duplicate id {}", v.id);
        }
        by_id.insert(end.id.bits(), END_TOKEN);
        Registry { variants, end, by_id }
    }

    /// Number of registered variants, end token excluded.
    pub fn len(&self) -> usize {
        self.variants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variants.is_empty()
    }

    /// Variant for a token index; `END_TOKEN` yields the end sentinel.
    /// Panics on reserved slots.
    pub fn get(&self, token: usize) -> &ModuleVariant {
        if token == END_TOKEN {
            &self.end
        } else {
            &self.variants[token]
        }
    }

    pub fn is_registered(&self, token: usize) -> bool {
        token == END_TOKEN || token < self.variants.len()
    }

    pub fn variants(&self) -> &[ModuleVariant] {
        &self.variants
    }

    /// Registered tokens, end token last.
    pub fn tokens(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.variants.len()).chain(std::iter::once(END_TOKEN))
    }

    pub fn token_of(&self, id: ModuleId) -> Result<usize> {
        self.by_id
            .get(&id.bits())
            .copied()
            .ok_or_else(|| Error::UnknownId(id.to_string()))
    }

    pub fn token_by_name(&self, name: &str) -> Option<usize> {
        if name == "end" {
            return Some(END_TOKEN);
        }
        self.variants.iter().position(|v| v.name == name)
    }

    pub fn tokens_of_kind(&self, kind: ModuleKind) -> Vec<usize> {
        self.tokens().filter(|&t| self.get(t).kind == kind).collect()
    }

    /// Registered tokens named by a follower class.
    pub fn resolve(&self, follower: Follower) -> Vec<usize> {
        self.tokens().filter(|&t| self.get(t).matches(follower)).collect()
    }
}

fn param(name: &'static str, lower: f64, upper: f64, default: f64) -> Param {
    Param { name, lower, upper, default: DefaultValue::Value(default), role: ParamRole::Continuous }
}

fn random_param(name: &'static str) -> Param {
    Param { name, lower: 0.0, upper: 1.0, default: DefaultValue::Random, role: ParamRole::Continuous }
}

fn selector() -> Param {
    Param {
        name: "op",
        lower: 0.0,
        upper: 1.0,
        default: DefaultValue::Random,
        role: ParamRole::OperatorSelector,
    }
}

fn space(params: Vec<Param>) -> ConfigSpace {
    ConfigSpace { params }
}

const MULTI_MUTATION_1: &[MutationOp] = &[
    MutationOp::CurrentToPbest1Archive,
    MutationOp::CurrentToRand1Archive,
    MutationOp::WeightedRandToPbest1,
];
const MULTI_MUTATION_2: &[MutationOp] =
    &[MutationOp::Rand1, MutationOp::Rand2, MutationOp::CurrentToRand1];
const MULTI_MUTATION_3: &[MutationOp] =
    &[MutationOp::Rand1, MutationOp::Best2, MutationOp::CurrentToRand1];
const MULTI_CROSSOVER_1: &[CrossoverOp] =
    &[CrossoverOp::Binomial, CrossoverOp::QbestBinomialArchive];
const MULTI_CROSSOVER_2: &[CrossoverOp] = &[CrossoverOp::Binomial, CrossoverOp::Exponential];
const MULTI_PSO_1: &[UpdateOp] = &[UpdateOp::FdrPso, UpdateOp::Clpso];

/// Config space of a single (non multi-strategy) operator.
pub fn mutation_space(op: MutationOp) -> ConfigSpace {
    use MutationOp::*;
    match op {
        Rand1 | Best1 | RandToBest1 => space(vec![param("F1", 0.0, 1.0, 0.5)]),
        Rand2 | Best2 | CurrentToBest1 | CurrentToRand1 | CurrentToRand1Archive => {
            space(vec![param("F1", 0.0, 1.0, 0.5), param("F2", 0.0, 1.0, 0.5)])
        }
        CurrentToPbest1 | CurrentToPbest1Archive | WeightedRandToPbest1 => space(vec![
            param("F1", 0.0, 1.0, 0.5),
            param("F2", 0.0, 1.0, 0.5),
            param("p", 0.0, 1.0, 0.05),
        ]),
        Gaussian => space(vec![param("sigma", 0.0, 1.0, 0.1)]),
        Polynomial => space(vec![param("eta_m", 20.0, 100.0, 20.0)]),
    }
}

pub fn crossover_space(op: CrossoverOp) -> ConfigSpace {
    use CrossoverOp::*;
    match op {
        Binomial | Exponential => space(vec![param("Cr", 0.0, 1.0, 0.9)]),
        QbestBinomial => space(vec![param("Cr", 0.0, 1.0, 0.9), param("p", 0.0, 1.0, 0.5)]),
        QbestBinomialArchive => {
            space(vec![param("Cr", 0.0, 1.0, 0.9), param("p", 0.0, 1.0, 0.18)])
        }
        Sbx => space(vec![param("eta_c", 20.0, 100.0, 20.0)]),
        Arithmetic => space(vec![param("alpha", 0.0, 1.0, 0.5)]),
    }
}

pub fn update_space(op: UpdateOp) -> ConfigSpace {
    use UpdateOp::*;
    match op {
        VanillaPso | Clpso => space(vec![
            param("w", 0.4, 0.9, 0.7),
            param("c1", 0.0, 2.0, 1.49445),
            param("c2", 0.0, 2.0, 1.49445),
        ]),
        FdrPso => space(vec![
            param("w", 0.4, 0.9, 0.729),
            param("c1", 0.0, 2.0, 1.0),
            param("c2", 0.0, 2.0, 1.0),
            param("c3", 0.0, 2.0, 2.0),
        ]),
        CmaEs | SepCmaEs | Mmes => {
            space(vec![param("cc", 0.1, 1.0, 1.0), param("cs", 0.1, 1.0, 1.0)])
        }
    }
}

fn standard_variants() -> Vec<ModuleVariant> {
    use Follower::{End as FEnd, Kind, Styled};
    use ModuleKind as K;

    let reproduction_start = vec![
        Styled(K::Mutation, Style::De),
        Kind(K::OtherUpdate),
        Styled(K::Crossover, Style::Ga),
    ];
    let to_boundary = vec![Kind(K::BoundaryControl)];
    let selection_rule = TopologyRule {
        followers: vec![Kind(K::RestartStrategy), Kind(K::PopulationReduction), FEnd],
        conditional: vec![(Kind(K::InformationSharing), Condition::NichingActive)],
    };
    let plain = |followers: Vec<Follower>| TopologyRule { followers, conditional: vec![] };

    let mut out = Vec::new();
    let mut push = |controllable: bool,
                    kind_code: u8,
                    variant: u16,
                    kind: ModuleKind,
                    style: Option<Style>,
                    name: &'static str,
                    config: ConfigSpace,
                    rule: TopologyRule,
                    op: Op| {
        out.push(ModuleVariant {
            id: ModuleId::encode(controllable, kind_code, variant).unwrap(),
            kind,
            style,
            name,
            config,
            rule,
            op,
        });
    };

    let init_rule = TopologyRule {
        followers: reproduction_start.clone(),
        conditional: vec![(Kind(K::Niching), Condition::NichingInactive)],
    };
    for (v, name, op) in [
        (1, "Uniform", InitOp::Uniform),
        (2, "Sobol", InitOp::Sobol),
        (3, "LHS", InitOp::Lhs),
        (4, "Halton", InitOp::Halton),
        (5, "Normal", InitOp::Normal),
    ] {
        push(false, 1, v, K::Initialization, None, name, ConfigSpace::default(), init_rule.clone(), Op::Init(op));
    }
    for (v, name, op) in [
        (1, "Rand_Niching", NichingOp::Random),
        (2, "Ranking_Niching", NichingOp::Ranking),
        (3, "Distance_Niching", NichingOp::Distance),
    ] {
        push(false, 2, v, K::Niching, None, name, ConfigSpace::default(), plain(reproduction_start.clone()), Op::Niching(op));
    }
    for (v, name, op) in [
        (1, "Clip", BoundaryOp::Clip),
        (2, "Rand_BC", BoundaryOp::Random),
        (3, "Periodic", BoundaryOp::Periodic),
        (4, "Reflect", BoundaryOp::Reflect),
        (5, "Halving", BoundaryOp::Halving),
    ] {
        push(false, 3, v, K::BoundaryControl, None, name, ConfigSpace::default(), plain(vec![Kind(K::Selection)]), Op::Boundary(op));
    }
    for (v, name, op) in [
        (1, "DE-like", SelectionOp::DeLike),
        (2, "Crowding", SelectionOp::Crowding),
        (3, "PSO-like", SelectionOp::PsoLike),
        (4, "Ranking", SelectionOp::Ranking),
        (5, "Tournament", SelectionOp::Tournament),
        (6, "Roulette", SelectionOp::Roulette),
    ] {
        push(false, 4, v, K::Selection, None, name, ConfigSpace::default(), selection_rule.clone(), Op::Selection(op));
    }
    for (v, name, op) in [
        (1, "Stagnation", RestartOp::Stagnation),
        (2, "Obj_Convergence", RestartOp::ObjConvergence),
        (3, "Solution_Convergence", RestartOp::SolutionConvergence),
        (4, "Obj&Solution_Convergence", RestartOp::ObjSolutionConvergence),
    ] {
        push(false, 5, v, K::RestartStrategy, None, name, ConfigSpace::default(), plain(vec![FEnd]), Op::Restart(op));
    }
    for (v, name, op) in [(1, "Linear", ReductionOp::Linear), (2, "Non-Linear", ReductionOp::NonLinear)] {
        push(false, 6, v, K::PopulationReduction, None, name, ConfigSpace::default(), plain(vec![Kind(K::RestartStrategy), FEnd]), Op::Reduction(op));
    }

    let de_cross = plain(vec![Styled(K::Crossover, Style::De)]);
    for (v, name, op) in [
        (1, "DE/rand/1", MutationOp::Rand1),
        (2, "DE/rand/2", MutationOp::Rand2),
        (3, "DE/best/1", MutationOp::Best1),
        (4, "DE/best/2", MutationOp::Best2),
        (5, "DE/current-to-best/1", MutationOp::CurrentToBest1),
        (6, "DE/current-to-rand/1", MutationOp::CurrentToRand1),
        (7, "DE/rand-to-best/1", MutationOp::RandToBest1),
        (8, "DE/current-to-pbest/1", MutationOp::CurrentToPbest1),
        (9, "DE/current-to-pbest/1+archive", MutationOp::CurrentToPbest1Archive),
        (10, "DE/weighted-rand-to-pbest/1", MutationOp::WeightedRandToPbest1),
        (11, "DE/current-to-rand/1+archive", MutationOp::CurrentToRand1Archive),
    ] {
        push(true, 1, v, K::Mutation, Some(Style::De), name, mutation_space(op), de_cross.clone(), Op::Mutation(op));
    }
    push(true, 1, 12, K::Mutation, Some(Style::Ga), "Gaussian_mutation", mutation_space(MutationOp::Gaussian), plain(to_boundary.clone()), Op::Mutation(MutationOp::Gaussian));
    push(true, 1, 13, K::Mutation, Some(Style::Ga), "Polynomial_mutation", mutation_space(MutationOp::Polynomial), plain(to_boundary.clone()), Op::Mutation(MutationOp::Polynomial));

    let f12 = || vec![param("F1", 0.0, 1.0, 0.5), param("F2", 0.0, 1.0, 0.5)];
    let mut mm1 = vec![selector()];
    mm1.extend(f12());
    mm1.push(param("p", 0.0, 1.0, 0.18));
    push(true, MULTI_STRATEGY_CODE, 1, K::Mutation, Some(Style::De), "Multi_Mutation_1", space(mm1), de_cross.clone(), Op::MultiMutation(MULTI_MUTATION_1));
    let mut mm = vec![selector()];
    mm.extend(f12());
    push(true, MULTI_STRATEGY_CODE, 2, K::Mutation, Some(Style::De), "Multi_Mutation_2", space(mm.clone()), de_cross.clone(), Op::MultiMutation(MULTI_MUTATION_2));
    push(true, MULTI_STRATEGY_CODE, 3, K::Mutation, Some(Style::De), "Multi_Mutation_3", space(mm), de_cross, Op::MultiMutation(MULTI_MUTATION_3));

    for (v, name, op) in [
        (1, "Binomial", CrossoverOp::Binomial),
        (2, "Exponential", CrossoverOp::Exponential),
        (3, "qbest_Binomial", CrossoverOp::QbestBinomial),
        (4, "qbest_Binomial+archive", CrossoverOp::QbestBinomialArchive),
    ] {
        push(true, 2, v, K::Crossover, Some(Style::De), name, crossover_space(op), plain(to_boundary.clone()), Op::Crossover(op));
    }
    let ga_mut = plain(vec![Styled(K::Mutation, Style::Ga)]);
    push(true, 2, 5, K::Crossover, Some(Style::Ga), "SBX", crossover_space(CrossoverOp::Sbx), ga_mut.clone(), Op::Crossover(CrossoverOp::Sbx));
    push(true, 2, 6, K::Crossover, Some(Style::Ga), "Arithmetic", crossover_space(CrossoverOp::Arithmetic), ga_mut, Op::Crossover(CrossoverOp::Arithmetic));
    let mc = || space(vec![selector(), param("Cr", 0.0, 1.0, 0.9)]);
    push(true, MULTI_STRATEGY_CODE, 0b110010, K::Crossover, Some(Style::De), "Multi_Crossover_1", mc(), plain(to_boundary.clone()), Op::MultiCrossover(MULTI_CROSSOVER_1));
    push(true, MULTI_STRATEGY_CODE, 0b110011, K::Crossover, Some(Style::De), "Multi_Crossover_2", mc(), plain(to_boundary.clone()), Op::MultiCrossover(MULTI_CROSSOVER_2));

    for (v, name, op, style) in [
        (1, "Vanilla_PSO", UpdateOp::VanillaPso, Style::Pso),
        (2, "FDR_PSO", UpdateOp::FdrPso, Style::Pso),
        (3, "CLPSO", UpdateOp::Clpso, Style::Pso),
        (4, "CMA-ES", UpdateOp::CmaEs, Style::Es),
        (5, "Sep-CMA-ES", UpdateOp::SepCmaEs, Style::Es),
        (6, "MMES", UpdateOp::Mmes, Style::Es),
    ] {
        push(true, 3, v, K::OtherUpdate, Some(style), name, update_space(op), plain(to_boundary.clone()), Op::Update(op));
    }
    let mut mp = vec![selector()];
    mp.extend(update_space(UpdateOp::FdrPso).params);
    push(true, MULTI_STRATEGY_CODE, 0b1010, K::OtherUpdate, Some(Style::Pso), "Multi_PSO_1", space(mp), plain(to_boundary), Op::MultiUpdate(MULTI_PSO_1));

    push(true, 5, 1, K::InformationSharing, None, "Sharing", space(vec![random_param("target")]), plain(vec![Kind(K::PopulationReduction), FEnd]), Op::Sharing);

    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn encodes_table_ids() {
        assert_eq!(ModuleId::encode(true, 1, 1).unwrap().to_string(), "1-000001-000000001");
        assert_eq!(ModuleId::encode(false, 1, 1).unwrap().to_string(), "0-000001-000000001");
        assert_eq!(ModuleId::encode(false, 7, 1).unwrap().to_string(), "0-000111-000000001");
    }

    #[test]
    fn decodes_table_ids() {
        let bin = ModuleId::parse_bits("1-000010-000000001").unwrap();
        assert_eq!(bin.decode(), (true, 2, 1));
        let lin = ModuleId::parse_bits("0-000110-000000001").unwrap();
        assert_eq!(lin.decode(), (false, 6, 1));
        let r = registry();
        assert_eq!(r.get(r.token_of(bin).unwrap()).name, "Binomial");
        assert_eq!(r.get(r.token_of(lin).unwrap()).name, "Linear");
    }

    #[test]
    fn encode_rejects_out_of_range_fields() {
        assert!(ModuleId::encode(true, 0, 1).is_err());
        assert!(ModuleId::encode(true, 8, 1).is_err());
        assert!(ModuleId::encode(false, 1, 0).is_err());
        assert!(ModuleId::encode(false, 1, 512).is_err());
    }

    #[test]
    fn unregistered_id_is_a_lookup_error() {
        let id = ModuleId::encode(true, 1, 300).unwrap();
        assert_eq!(id.decode(), (true, 1, 300));
        assert!(matches!(registry().token_of(id), Err(Error::UnknownId(_))));
    }

    #[test]
    fn registry_counts_match_tables() {
        let r = registry();
        let count = |k| r.variants().iter().filter(|v| v.kind == k).count();
        assert_eq!(count(ModuleKind::Initialization), 5);
        assert_eq!(count(ModuleKind::Niching), 3);
        assert_eq!(count(ModuleKind::BoundaryControl), 5);
        assert_eq!(count(ModuleKind::Selection), 6);
        assert_eq!(count(ModuleKind::RestartStrategy), 4);
        assert_eq!(count(ModuleKind::PopulationReduction), 2);
        // 13 single + 3 multi-strategy
        assert_eq!(count(ModuleKind::Mutation), 16);
        assert_eq!(count(ModuleKind::Crossover), 8);
        assert_eq!(count(ModuleKind::OtherUpdate), 7);
        assert_eq!(count(ModuleKind::InformationSharing), 1);
        assert_eq!(r.len(), 57);
        let multi = r.variants().iter().filter(|v| v.is_multi_strategy()).count();
        assert_eq!(multi, 6);
        for v in r.variants().iter().filter(|v| v.is_multi_strategy()) {
            assert_eq!(v.id.decode().1, MULTI_STRATEGY_CODE);
            assert_eq!(v.config.params[0].role, ParamRole::OperatorSelector);
        }
        assert_eq!(r.get(END_TOKEN).id.to_string(), "0-000111-000000001");
    }

    #[test]
    fn controllable_flag_agrees_with_kind() {
        for v in registry().variants() {
            assert_eq!(v.id.decode().0, v.kind.is_controllable(), "{}", v.name);
            assert_eq!(v.config.is_empty(), !v.is_controllable(), "{}", v.name);
        }
    }

    proptest! {
        #[test]
        fn id_roundtrip(c in any::<bool>(), k in 1u8..=7, v in 1u16..=511) {
            let id = ModuleId::encode(c, k, v).unwrap();
            prop_assert_eq!(id.decode(), (c, k, v));
            prop_assert_eq!(ModuleId::parse_bits(&id.bit_string()).unwrap(), id);
            prop_assert_eq!(ModuleId::parse_bits(&id.to_string()).unwrap(), id);
        }
    }

    #[test]
    fn registered_ids_roundtrip() {
        let r = registry();
        for t in r.tokens() {
            let id = r.get(t).id;
            let (c, k, v) = id.decode();
            assert_eq!(ModuleId::encode(c, k, v).unwrap(), id);
            assert_eq!(r.token_of(id).unwrap(), t);
        }
    }
}
