use thiserror::Error;

/// Failures raised by the geometry engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point {point:?} lies outside the domain box")]
    OutsideDomain { point: Vec<f64> },

    #[error("domain margin violated: need {margin} clearance around {point:?}")]
    MarginViolated { point: Vec<f64>, margin: f64 },

    #[error("non-finite value produced during evaluation")]
    NonFinite,

    #[error("degenerate induced metric: |det g| = {det:e}")]
    DegenerateMetric { det: f64 },

    #[error("normal direction is null (inner(N, N) = {norm:e})")]
    NullNormal { norm: f64 },

    #[error("induced metric is not positive definite")]
    IndefiniteMetric,

    #[error("point is off the quadric: |inner(x, x) - eps_q| = {deviation:e}")]
    OffQuadric { deviation: f64 },

    #[error("conformal matrix constraint violated at {violations:?}")]
    InvalidConformalMatrix { violations: Vec<(usize, usize)> },

    #[error("invalid signature: {0}")]
    InvalidSignature(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown catalog entry `{0}`")]
    UnknownEntry(String),

    #[error("field ambient does not match chart ambient")]
    AmbientMismatch,

    #[error("jet order {have} is too low, need {need}")]
    JetOrder { have: u8, need: u8 },

    #[error("mu is undefined: the Weingarten operator vanishes")]
    UndefinedMu,

    #[error("degenerate concircular fit: angle function spread {spread:e} across samples")]
    DegenerateFit { spread: f64 },

    #[error("no closed-form soliton function for `{0}`")]
    NoClosedForm(String),
}

pub type Result<T> = std::result::Result<T, Error>;
