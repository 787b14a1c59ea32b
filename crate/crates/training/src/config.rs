use serde::{Deserialize, Serialize};

use autoec_agents::ModelConfig;

/// What drives hyperparameters while the composer trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Stage1Controller {
    /// The frozen, untrained configuration policy.
    #[default]
    Frozen,
    /// Registry defaults for every module.
    Defaults,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Episodes per composer update.
    pub agent1_batch: usize,
    /// Episodes stepped together per controller rollout.
    pub agent2_batch: usize,
    pub nstep: usize,
    pub kepoch: usize,
    pub clip_eps: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub value_coef: f64,
    pub grad_clip: f64,
    pub seed: u64,
    pub model: ModelConfig,
    pub stage1_controller: Stage1Controller,
    /// Stage-one then stage-two repetitions.
    pub cycles: usize,
    /// Feeds all-zero problem and progress features to both policies.
    pub zero_features: bool,
    /// Fixed population size, overriding the dimension rule.
    pub np_init: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            lr: 1e-4,
            agent1_batch: 128,
            agent2_batch: 64,
            nstep: 10,
            kepoch: 3,
            clip_eps: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            value_coef: 0.5,
            grad_clip: 1.0,
            seed: 0,
            model: ModelConfig::default(),
            stage1_controller: Stage1Controller::Frozen,
            cycles: 1,
            zero_features: false,
            np_init: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("agent1_batch", self.agent1_batch),
            ("agent2_batch", self.agent2_batch),
            ("nstep", self.nstep),
            ("kepoch", self.kepoch),
            ("cycles", self.cycles),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(format!("{name} must be positive"));
            }
        }
        if !(self.lr >= 0.0 && self.clip_eps > 0.0 && self.grad_clip > 0.0 && self.value_coef >= 0.0) {
            return Err("learning rate, clip range, clip norm and value weight must be non-negative".into());
        }
        if !((0.0..=1.0).contains(&self.gamma) && (0.0..=1.0).contains(&self.gae_lambda)) {
            return Err("gamma and gae_lambda must lie in [0, 1]".into());
        }
        Ok(())
    }
}
