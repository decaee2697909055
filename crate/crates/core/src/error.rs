use thiserror::Error;

use crate::mdp::{ComponentStructure, ValidationReport};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(ValidationReport),

    #[error("chain is reducible ({} strongly connected components); restrict analysis to a closed component", .0.num_components())]
    Reducible(ComponentStructure),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{what} needs at most {max} states, got {got}")]
    TooLarge {
        what: &'static str,
        max: usize,
        got: usize,
    },

    #[error("value iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("no strongly connected sample after {0} attempts; density is too low")]
    RetryBudget(usize),

    #[error("malformed MDP file: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
