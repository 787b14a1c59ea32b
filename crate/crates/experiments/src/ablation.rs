//! Ablations that swap trained agents for untrained ones or defaults.

use std::fmt;
use std::str::FromStr;

use autoec_agents::{Checkpoint, Composer, ConfigPolicy, Decode, ModelConfig};
use autoec_core::problem::ProblemInstance;
use autoec_core::rng::{self, tag};

use crate::error::{ExpError, Result};
use crate::eval::{evaluate, EvalOptions, EvalResult, Method};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationMode {
    /// Both trained agents.
    Full,
    /// Untrained composer, trained controller.
    NoA1,
    /// Trained composer, default configurations.
    NoA2,
    /// Both agents untrained.
    NoA1A2,
    /// Agents trained and run on all-zero features.
    Sbs,
}

impl AblationMode {
    pub const ALL: [AblationMode; 5] =
        [AblationMode::Full, AblationMode::NoA1, AblationMode::NoA2, AblationMode::NoA1A2, AblationMode::Sbs];

    pub fn name(self) -> &'static str {
        match self {
            AblationMode::Full => "full",
            AblationMode::NoA1 => "no_a1",
            AblationMode::NoA2 => "no_a2",
            AblationMode::NoA1A2 => "no_a1a2",
            AblationMode::Sbs => "sbs",
        }
    }
}

impl fmt::Display for AblationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AblationMode {
    type Err = ExpError;

    fn from_str(s: &str) -> Result<Self> {
        AblationMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| ExpError::Invalid(format!("unknown ablation mode {s:?}")))
    }
}

/// Freshly initialized composer and controller for `seed`.
pub fn fresh_agents(model: ModelConfig, seed: u64) -> (Composer, ConfigPolicy) {
    let composer = Composer::new(model, &mut rng::stream(rng::derive(seed, 1), tag::PARAMS));
    let policy = ConfigPolicy::new(model, &mut rng::stream(rng::derive(seed, 2), tag::PARAMS));
    (composer, policy)
}

/// Evaluates one ablation. `trained` holds the regular checkpoint and
/// `sbs` the one trained on zeroed features; untrained agents come from
/// [`fresh_agents`] with `opts.seed`.
pub fn ablation_run(
    mode: AblationMode,
    trained: Option<&Checkpoint>,
    sbs: Option<&Checkpoint>,
    model: ModelConfig,
    instances: &[ProblemInstance],
    opts: &EvalOptions,
    decode: Decode,
) -> Result<EvalResult> {
    fn need<'c>(c: Option<&'c Checkpoint>, mode: AblationMode, what: &str) -> Result<&'c Checkpoint> {
        c.ok_or_else(|| ExpError::MissingCheckpoint(format!("{mode} needs {what}")))
    }
    let (fresh_c, fresh_p) = fresh_agents(model, opts.seed);
    let method = match mode {
        AblationMode::Full => {
            let ck = need(trained, mode, "a trained checkpoint")?;
            Method::Agents { composer: &ck.composer, controller: Some(&ck.controller), decode, zero_features: false }
        }
        AblationMode::NoA1 => {
            let ck = need(trained, mode, "a trained checkpoint")?;
            Method::Agents { composer: &fresh_c, controller: Some(&ck.controller), decode, zero_features: false }
        }
        AblationMode::NoA2 => {
            let ck = need(trained, mode, "a trained checkpoint")?;
            Method::Agents { composer: &ck.composer, controller: None, decode, zero_features: false }
        }
        AblationMode::NoA1A2 => {
            Method::Agents { composer: &fresh_c, controller: Some(&fresh_p), decode, zero_features: false }
        }
        AblationMode::Sbs => {
            let ck = need(sbs, mode, "a checkpoint trained on zeroed features")?;
            Method::Agents { composer: &ck.composer, controller: Some(&ck.controller), decode, zero_features: true }
        }
    };
    evaluate(mode.name(), &method, instances, opts)
}
