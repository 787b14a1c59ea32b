pub mod engine;
pub mod error;
pub mod features;
pub mod rng;
pub mod problem;
pub mod space;

pub use error::{Error, Result};
