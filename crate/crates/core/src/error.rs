use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid simplex point: {0}")]
    NotSimplex(String),

    #[error("invalid stochastic matrix: {0}")]
    NotStochastic(String),

    #[error("invalid generator matrix: {0}")]
    NotGenerator(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("rate f[{i}->{j}] = {value} at y = {y:?} violates declared bound {bound}")]
    RateBound {
        i: usize,
        j: usize,
        y: Vec<f64>,
        value: f64,
        bound: f64,
    },

    #[error("ODE step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("color {color} loses mass at rate {outflow} but holds only {mass}")]
    ZeroMassOutflow {
        color: usize,
        outflow: f64,
        mass: f64,
    },

    #[error("construction failed at t = {t}: {reason}")]
    Construction { t: f64, reason: String },

    #[error("matrix sampler returned a non-stochastic matrix at step {step}: {reason}")]
    Sampler { step: usize, reason: String },

    #[error("rate field is not constant: {0}")]
    NotConstant(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
