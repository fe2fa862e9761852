//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by model construction, field algebra, solvers, and I/O.
#[derive(Debug, Error)]
pub enum SolvateError {
    /// A validation rule derived from the model assumptions failed.
    /// The message carries the assumption tag, e.g. "(A3)".
    #[error("validation: {0}")]
    Validation(String),

    /// Two fields (or a field and a solution) do not share a grid.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Gradient of the interaction potential requested exactly at an
    /// atom center, where it is singular.
    #[error("singularity: {0}")]
    Singularity(String),

    /// A quadrature or tabulation failed to produce a monotone profile.
    #[error("profile construction: {0}")]
    ProfileConstruction(String),

    /// Interface shape too small for the requested transition width.
    #[error("shape too small: {0}")]
    ShapeTooSmall(String),

    /// Newton iteration failed to converge; carries the residual history.
    #[error("pb solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    /// A solution violates an a-priori bound; signals a solver or model bug.
    #[error("bound violation: {0}")]
    BoundViolation(String),

    /// A candidate potential does not match the boundary data.
    #[error("admissibility: {0}")]
    Admissibility(String),

    /// A cached solution was computed for a different field.
    #[error("stale companion: {0}")]
    Consistency(String),

    /// A test field's support includes a forbidden point.
    #[error("support violation: {0}")]
    SupportViolation(String),

    /// Surface trace extraction failed near under-resolved curvature.
    #[error("resolution: {0}")]
    Resolution(String),

    /// Gradient-flow time step shrank below the configured minimum.
    #[error("flow stagnation at t = {time:.6e} with dt = {dt:.3e}")]
    Stagnation { time: f64, dt: f64 },

    /// Config file syntax or unknown-key error.
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
