//! Finite-volume solver library for one-dimensional scalar conservation laws
//! whose flux depends on space through a random, piecewise-discontinuous
//! coefficient `a(ω, x)`.
//!
//! The pipeline: sample a composite jump coefficient (Matérn/KL Gaussian part
//! plus a piecewise-constant jump field), build a mesh aligned with the
//! coefficient discontinuities (optionally with refined wave cells next to
//! them), evolve the conservation law with a Godunov finite-volume scheme,
//! and drive Monte Carlo convergence and time-to-error studies over many
//! coefficient realizations.

// Validation deliberately writes `!(x > 0.0)` so NaN fails closed.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod entropy;
pub mod experiments;
pub mod jumpfield;
pub mod mesh;
pub mod randfield;
pub mod solver;

/// Library-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("eigendecomposition failed: {0}")]
    Eigendecomposition(String),
    #[error("invalid coefficient realization: {0}")]
    InvalidRealization(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("solve aborted at step {step} (t = {time}): {reason}")]
    SolveFailure {
        step: usize,
        time: f64,
        reason: String,
    },
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonFailure { iterations: usize, residual: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
