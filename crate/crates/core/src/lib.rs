pub mod error;
pub mod spaces;

pub use error::{LabError, Result};
pub mod classes;
pub mod empirical;
pub mod rng;
pub mod processes;
pub mod exec;
pub mod learners;
pub mod online;
pub mod diagnostics;
pub mod harness;
pub mod suite;
