//! Grounding behavior-tree systems: symbolic planning over STRIPS action
//! models, a simulated policy library with hidden transitions, and the
//! proposer-driven search that pairs models with policies.
pub mod env;
pub mod error;
pub mod cli;
pub mod grounding;
pub mod io;
pub mod planner;
pub mod proposers;
pub mod symbolic;
pub use error::{Error, Result};
