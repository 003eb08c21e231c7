use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid resolution: n_per_axis = {0}, need at least 4")]
    InvalidResolution(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("basis index {0} out of range 0..=4")]
    Index(usize),

    #[error("kernel evaluated on the diagonal v = w")]
    DiagonalSingularity,

    #[error("assembly failed: {0}")]
    Assembly(String),

    #[error("ill-conditioned system: condition estimate {0:.3e}")]
    Conditioning(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("near-eigenvalue solve: condition estimate {0:.3e}")]
    NearEigenvalue(f64),

    #[error("newton iteration did not converge: residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },

    #[error("eigensolver failed: {0}")]
    Solver(String),

    #[error("discretization failure: {0}")]
    Discretization(String),

    #[error("direction parallel to e3 has no transverse unit vector")]
    PoleExclusion,

    #[error("channel {0} has nonpositive values in the fitting window")]
    ChannelDead(String),

    #[error("need at least 8 samples in the fitting window, found {0}")]
    TooFewSamples(usize),

    #[error("{failed} of {total} modes failed to propagate")]
    ModeFailures { failed: usize, total: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
