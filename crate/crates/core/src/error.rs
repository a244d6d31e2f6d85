use thiserror::Error;

/// Errors raised across the fluid-model library.
///
/// Validation problems (bad specs, out-of-range arguments) are distinguished
/// from numerical-certificate failures so callers can map them to different
/// exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed spec `{spec}`: {reason}")]
    MalformedSpec { spec: String, reason: String },

    #[error("distribution places mass at the origin (F(0) = {0})")]
    MassAtOrigin(f64),

    #[error("distribution has an atom at {0}; only atomless laws are supported")]
    AtomInSpec(f64),

    #[error("service distribution has infinite mean")]
    InfiniteMean,

    #[error("negative mass {0}")]
    NegativeMass(f64),

    #[error("measure has infinite total mass")]
    InfiniteMass,

    #[error("initial workload <chi, xi> is infinite")]
    WorkloadInfinite,

    #[error("no certified tail bound for moment order {0}")]
    TailBoundMissing(f64),

    #[error("test function invalid: {0}")]
    TestFunctionInvalid(String),

    #[error("renewal scheme diverges: 1 - (h/2) f_e(0) = {0} <= 0; decrease h")]
    DivergentScheme(f64),

    #[error("argument {what} = {value} outside the tabulated range [0, {limit}]")]
    OutOfRange { what: &'static str, value: f64, limit: f64 },

    #[error("time {t} lies beyond the solved horizon T(u_max) = {limit}")]
    BeyondGrid { t: f64, limit: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("cannot resample: step {from} is not an integer multiple of {to}")]
    GridResampleFailure { from: f64, to: f64 },

    #[error("beta_e = 0 (infinite mean excess lifetime): {0} is undefined")]
    DegenerateRate(&'static str),

    #[error("insufficient samples for a rate fit: {found} positive samples in window, need {needed}")]
    InsufficientSamples { found: usize, needed: usize },

    #[error("all distances in the window are zero (exact convergence); slope undefined")]
    ExactConvergence,

    #[error("invalid scale r = {0}; need r >= 1")]
    InvalidScale(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate solution (xi = 0): {0} is undefined")]
    DegenerateSolution(&'static str),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
