use num_complex::Complex64;
use thiserror::Error;

/// Errors produced by model construction, network composition, and the
/// numerical solvers.
#[derive(Debug, Clone, Error)]
pub enum QlinError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("channel name collision on {0:?}; relabel one operand before concatenating")]
    RelabelRequired(Vec<String>),

    #[error("unknown channel {0:?}")]
    UnknownChannel(String),

    #[error("invalid wiring: {0}")]
    InvalidWiring(String),

    #[error("algebraic loop: I - D_loop is numerically singular (rcond {rcond:.3e})")]
    AlgebraicLoop { rcond: f64 },

    #[error("no steady state: drift matrix is not Hurwitz (max Re eigenvalue {max_re:.6e})")]
    NoSteadyState {
        max_re: f64,
        eigenvalues: Vec<Complex64>,
    },

    #[error("resonance: sI - A is singular at s = {0}")]
    Resonance(Complex64),

    #[error("Riccati solve failed: {0}")]
    RiccatiFailure(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("covariance is not positive semidefinite (min eigenvalue {0:.6e})")]
    IndefiniteCovariance(f64),

    #[error("controller synthesis failed: {0}")]
    SynthesisFailure(String),

    #[error("optimization failed: {0}")]
    OptimizationFailure(String),
}

pub type Result<T> = std::result::Result<T, QlinError>;
