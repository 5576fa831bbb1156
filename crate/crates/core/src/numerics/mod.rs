//! Shared numerical kernels: dense linear algebra, optimizers, networks.

pub mod adam;
pub mod cholesky;
pub mod gradcheck;
pub mod lbfgs;
pub mod matrix;
pub mod mlp;
pub mod rng;

pub use adam::AdamState;
pub use cholesky::{cholesky, CholeskyFactor};
pub use lbfgs::{lbfgs_minimize, LbfgsConfig, Minimum};
pub use matrix::Matrix;
pub use mlp::{Init, Mlp, Tape};
pub use rng::{derive_seed, seeded, SeededRng};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (max deviation {deviation:e})")]
    NotSymmetric { deviation: f64 },
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("objective is not finite at the starting point")]
    NonFiniteObjective,
    #[error("invalid network architecture {0}")]
    InvalidArchitecture(String),
}
