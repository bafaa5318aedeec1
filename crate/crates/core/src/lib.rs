//! Job-shop scheduling with learned machine-permutation quality.
//!
//! The pipeline: exact solving labels machine permutations with a quality
//! score, a recurrent oracle learns to predict that score from per-operation
//! features, and a tabu search uses the oracle to prune its N1 neighborhood.

pub mod bench;
pub mod error;
pub mod exact;
pub mod features;
pub mod instances;
pub mod labeling;
pub mod model;
pub mod oracle;
pub mod seeding;
pub mod tabu;
pub mod tensor;

pub use error::{Error, Result};
pub use model::{evaluate, Instance, OpId, Operation, Solution, Time};
