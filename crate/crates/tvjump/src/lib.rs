//! Vectorial total-variation denoising and jump-set analysis.
//!
//! The crate is organized around a small set of field types on regular grids
//! ([`grid`]), a family of matrix regularizers evaluated through singular
//! values ([`specnorm`]), pointwise data-fidelity terms ([`fidelity`]), and a
//! primal-dual denoising solver ([`solver`]).  On top of those sit tools for
//! probing solutions: inner-variation diagnostics ([`innervar`]), discrete
//! jump detection and edge-profile checks ([`jump`]), and reproducible
//! synthetic test data ([`synth`]).

pub mod fidelity;
pub mod grid;
pub mod innervar;
pub mod jump;
pub mod solver;
pub mod specnorm;
pub mod synth;

use thiserror::Error;

/// Errors produced by field construction, sampling, and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("cube out of domain: {0}")]
    CubeOutOfDomain(String),
    #[error("no dual-ball projection for non-homogeneous family")]
    NoDualBall,
    #[error("unsupported regularizer for this solver: {0}")]
    UnsupportedRegularizer(String),
    #[error("exact TGV out of scope: {0}")]
    ExactTgvOutOfScope(String),
    #[error("inner variation is not a diffeomorphism: {0}")]
    NotADiffeomorphism(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
