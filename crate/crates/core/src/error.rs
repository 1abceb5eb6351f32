use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infrared-singular mode: massless field at zero momentum")]
    InfraredSingular,

    #[error("imaginary-time exponent {0} out of range; use the zero-temperature path")]
    ExponentOverflow(f64),

    #[error("operation requires a finite inverse temperature")]
    FiniteTemperatureRequired,

    #[error("operation requires zero temperature (beta = inf)")]
    ZeroTemperatureRequired,

    #[error("coarse-grained state is pure (2uv = {0}); effective temperature diverges")]
    PureCoarseState(f64),

    #[error("singular 2x2 block (|det| = {0:e})")]
    SingularBlock(f64),

    #[error("channel is not valid at |k| = {k_norm}: smallest eigenvalue {min_eigenvalue:e}")]
    InvalidChannel { k_norm: f64, min_eigenvalue: f64 },

    #[error("sector modes must be pairwise distinct")]
    DuplicateModes,

    #[error("sector of {0} modes exceeds the supported maximum of {max}", max = crate::kernels::MAX_SECTOR_MODES)]
    SectorTooLarge(usize),

    #[error("metric kind {0} is not available for this operation")]
    UnsupportedMetric(&'static str),

    #[error("perturbation {0} is not available for this operation")]
    UnsupportedPerturbation(&'static str),

    #[error("sector metric is not positive semidefinite (eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("quadrature did not converge: estimate {estimate:e} with error {error:e}")]
    QuadratureNotConverged { estimate: f64, error: f64 },

    #[error("density is not finite at K = {0:?}")]
    NonFiniteDensity(Vec<f64>),
}

pub type Result<T> = std::result::Result<T, Error>;
