//! Cooperative two-stage training.
//!
//! Stage one trains the [`Composer`](autoec_agents::Composer) with
//! episodic REINFORCE against a frozen controller; stage two trains the
//! [`ConfigPolicy`](autoec_agents::ConfigPolicy) with clipped PPO over
//! per-generation transitions while the composer stays frozen.

mod accum;
pub mod config;
pub mod ppo;
pub mod reinforce;
pub mod stages;

pub use config::{Stage1Controller, TrainConfig};
pub use ppo::{gae, ppo_update, PpoStats, RolloutBuffer, Transition};
pub use reinforce::{reinforce_update, EpisodeRecord, ReinforceStats};
pub use stages::{train_composer, train_controller, EpochLog, StageReport};

/// Normalized one-generation improvement of the best-so-far objective.
/// A degenerate gap (`f0_best ≤ f_star + 1e-12`) yields 0.
pub fn compute_reward(prev_best: f64, cur_best: f64, f0_best: f64, f_star: f64) -> f64 {
    let gap = f0_best - f_star;
    if gap <= 1e-12 {
        return 0.0;
    }
    ((prev_best - cur_best) / gap).max(0.0)
}
