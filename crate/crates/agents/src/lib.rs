//! Transformer policies over the modular operator space.
//!
//! [`Composer`] writes a workflow token by token from problem features;
//! [`ConfigPolicy`] reads the workflow and the search progress each
//! generation and proposes hyperparameters for every controllable module,
//! with a value head on the same trunk.

pub mod checkpoint;
pub mod composer;
pub mod controller;
pub mod nn;
pub mod optim;
pub mod tape;

pub use checkpoint::{param_hash, Checkpoint};
pub use composer::{Composer, Decode, WorkflowSample};
pub use controller::{ConfigAction, ConfigPolicy, PolicyController};
pub use nn::ModelConfig;
pub use optim::{clip_global_norm, Adam};

/// Total learnable parameters of both policies and the value head.
pub fn total_param_count(config: &ModelConfig) -> usize {
    Composer::param_count(config) + ConfigPolicy::param_count(config)
}
