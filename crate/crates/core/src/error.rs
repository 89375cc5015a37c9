use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("quadrature did not converge: {0}")]
    QuadratureFailure(String),

    #[error("degenerate integration interval [{lo}, {hi}]")]
    DegenerateInterval { lo: f64, hi: f64 },

    #[error("ill-conditioned polynomial system (orthonormality residual {0:e})")]
    IllConditioned(f64),

    #[error("polynomial degree {k} out of range (system built to degree {max})")]
    DegreeOutOfRange { k: usize, max: usize },

    #[error("clipped density estimate integrates to zero")]
    AllZeroDensity,

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("every candidate configuration was rejected")]
    AllRejected,

    #[error("unknown kernel `{0}` (expected gauss, epan, biweight, triweight, quadweight or uniform)")]
    UnknownKernel(String),

    #[error("unknown distribution `{0}`")]
    UnknownDistribution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
