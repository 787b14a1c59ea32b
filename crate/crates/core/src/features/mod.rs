//! Problem and progress features.

pub mod ela;
pub mod progress;
