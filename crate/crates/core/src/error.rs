use thiserror::Error;

use crate::model::{OpId, Time};

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("malformed input at line {line}: {reason}")]
    MalformedFormat { line: usize, reason: String },

    #[error("job {job} visits machine {machine} more than once")]
    DuplicateMachineInRoute { job: usize, machine: usize },

    #[error("invalid machine permutation: {0}")]
    InvalidPermutation(String),

    /// The machine orders induce a cycle; the witness lists the operations
    /// along it in arc order.
    #[error("infeasible orientation, cycle through {0:?}")]
    Infeasible(Vec<OpId>),

    #[error("enumeration needs {candidates} candidates, cap is {cap}")]
    TooLarge { candidates: u128, cap: u128 },

    #[error("requested {requested} distinct sequences but only {available} exist")]
    CapExceeded { requested: u128, available: u128 },

    #[error("permutation could not be labeled: solver stopped with {status}")]
    Unlabeled { status: String, bound: Option<Time> },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("weight file: {0}")]
    WeightFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
