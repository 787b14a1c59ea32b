//! Evaluation harness for composed optimizers: normalized-objective
//! tables, ablations, the module-importance matrix and canonical
//! baselines.

pub mod ablation;
pub mod baselines;
pub mod error;
pub mod eval;
pub mod importance;
pub mod report;
pub mod stats;

pub use ablation::{ablation_run, fresh_agents, AblationMode};
pub use baselines::{baseline_method, baseline_workflow, Baseline};
pub use error::{ExpError, Result};
pub use eval::{evaluate, evaluate_checkpoint, EvalOptions, EvalResult, InstanceSummary, Method, RunRecord};
pub use importance::{importance_analysis, ImportanceMatrix, CHARACTERISTICS};
pub use stats::{rank_sum, Mark, RankSum};

/// Version stamped into every emitted CSV row and JSON document.
pub const SCHEMA_VERSION: u32 = 1;
