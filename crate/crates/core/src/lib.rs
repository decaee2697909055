//! Structural exploration-hardness analysis for tabular MDPs.
//!
//! The crate derives the uniform random-walk chain of an MDP, computes its
//! stationary distribution, directed-graph Laplacian spectrum and Cheeger
//! constant, evaluates closed-form covering-length bounds, and checks them
//! against exact linear-algebra oracles and Monte Carlo simulation of
//! random-walk exploration followed by greedy exploitation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod domains;
pub mod error;
pub mod learn;
pub mod mdp;
pub mod serde_util;
pub mod sim;
pub mod spectral;
pub mod sweep;

pub use error::{Error, Result};
pub use mdp::{TabularMdp, TransitionMatrix};
