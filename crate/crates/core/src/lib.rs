//! Bayesian community detection with a diagonally dominant stochastic block
//! model: network generation, posterior evaluation, a reversible-jump
//! Metropolis–Hastings sampler over `(Z, K, P)`, identification of
//! communities from node-wise probabilities, and posterior summaries.

pub mod error;
pub mod experiment;
pub mod identify;
pub mod inference;
pub mod math;
pub mod model;
pub mod netgen;
pub mod sampler;

pub use error::{Error, Result};
pub use model::{Assignment, BlockStats, ConnectivityMatrix, Hyperparams};
pub use netgen::{AdjacencyMatrix, GroundTruth};
