use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid exponent: {0}")]
    InvalidExponent(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("field is not divergence-free: max mode residual {residual:e}")]
    NotDivergenceFree { residual: f64 },

    #[error("gradient vanishes identically; ratio undefined")]
    ZeroGradient,

    #[error("precondition violated at point {index}: |f| = {value} is neither 0 nor > {threshold}")]
    ThresholdPrecondition {
        index: usize,
        value: f64,
        threshold: f64,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("CFL violated at t = {t}: dt = {dt} > {limit}")]
    Cfl { t: f64, dt: f64, limit: f64 },

    #[error("numerical blow-up at t = {t}: max|u| = {max_speed:e}")]
    BlowUp { t: f64, max_speed: f64 },

    #[error("config error at key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("snapshot format: {0}")]
    Format(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
