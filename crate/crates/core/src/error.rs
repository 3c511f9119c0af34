use thiserror::Error;

/// Errors raised by the solvers and the verification harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid fractional order s = {0}; expected 0 < s < 1")]
    InvalidOrder(f64),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("under-resolved mesh: {0}")]
    UnderResolved(String),

    #[error("grid functions live on different meshes")]
    MeshMismatch,

    #[error(
        "shift alpha = {alpha} is not below the principal eigenvalue {lambda1}: \
         the generalized torsional rigidity is finite only for alpha < lambda1"
    )]
    AboveSpectrum { alpha: f64, lambda1: f64 },

    #[error("shifted system is not positive definite")]
    Indefinite,

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    #[error("bracket failure: {0}")]
    Bracket(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
