//! Error type shared by every module of the toolkit.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Family parameters violate their positivity / range constraints.
    #[error("invalid parameters for {family}: {reason}")]
    InvalidParams { family: String, reason: String },

    /// Adaptive quadrature exhausted its panel budget.
    #[error("quadrature did not converge: value {value}, error estimate {abs_error_estimate} after {panels_used} panels")]
    NonConvergence {
        value: f64,
        abs_error_estimate: f64,
        panels_used: usize,
    },

    /// An integrand or objective returned NaN or an infinity at an interior point.
    #[error("non-finite evaluation at x = {x}")]
    NonFiniteEvaluation { x: f64 },

    #[error("point {x} lies outside the support {support}")]
    OffSupport { x: f64, support: String },

    /// S_q is not contained in S_p (or the supports are required to coincide and do not).
    #[error("support mismatch: {q_support} is not admissible against {p_support}")]
    SupportMismatch { p_support: String, q_support: String },

    #[error("right-hand side is not integrable against the target: {0}")]
    NonIntegrable(String),

    #[error("target is not a power-exponential density c·exp(-d|x|^alpha) on a scale-invariant support")]
    NotPowerExponential,

    #[error("right-hand side is not centered under the target: E_p[h] = {mean}")]
    NotCentered { mean: f64 },

    #[error("unknown function class `{0}`")]
    UnknownClass(String),

    #[error("distance `{metric}` is not finite for this pair")]
    NonFiniteDistance { metric: String },

    #[error("moments of q are not finite")]
    NonFiniteMoments,

    #[error("invalid mixing distribution: {0}")]
    InvalidMixing(String),

    /// J = Γ + Ψ failed to hold to the enforced tolerance.
    #[error("Gaussian decomposition mismatch: J = {j}, Γ + Ψ = {gamma_plus_psi}")]
    DecompositionMismatch { j: f64, gamma_plus_psi: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
