use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("expected {expected} components, found {found}")]
    ComponentMismatch { expected: usize, found: usize },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("shell index {q} outside [-1, {qmax}]")]
    ShellOutOfRange { q: i32, qmax: i32 },
    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),
    #[error("state drift: divergence {0:e} exceeds tolerance")]
    StateDrift(f64),
    #[error("numerical blow-up at t = {0}")]
    BlowUp(f64),
    #[error("past blow-up of the bound: t = {t} >= {limit}")]
    PastBlowUp { t: f64, limit: f64 },
    #[error("insufficient band-limiting: {0}")]
    InsufficientBandLimit(String),
    #[error("random draw has zero norm; reseed (seed {0})")]
    ZeroDraw(u64),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("mismatched traces: {0}")]
    MismatchedTraces(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("snapshot format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
