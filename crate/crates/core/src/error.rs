use thiserror::Error;

/// Errors produced by the engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("radius must be positive, got {0}")]
    Domain(f64),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error(
        "quadrature did not converge within {subdivisions} subdivisions \
         (best value {value:e}, error estimate {err_estimate:e})"
    )]
    Convergence {
        value: f64,
        err_estimate: f64,
        subdivisions: usize,
    },

    #[error("mode (k={degree}, m={order}): {source}")]
    Mode {
        degree: usize,
        order: i32,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid test function: {0}")]
    TestFunction(String),

    #[error("invalid spectrum: {0}")]
    Spectrum(String),

    #[error("singular spectrum: eigenvalue {0} equals 3/4, the constant is unbounded")]
    SingularSpectrum(f64),

    #[error("operation requires the sphere spectrum")]
    NotSphere,

    #[error("denominator form is not positive definite (pivot {pivot} = {value:e})")]
    Factorization { pivot: usize, value: f64 },

    #[error("eigensolver did not converge: {0}")]
    Eigen(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("finite-difference stencil leaves the profile window at |x| = {radius}")]
    Stencil { radius: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
