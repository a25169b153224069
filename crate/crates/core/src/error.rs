use alloc::string::String;

/// Failures raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("step called on a stopped state (rho = {rho})")]
    StoppedState { rho: u64 },
    #[error("state has negative or empty counts (x = {x}, y = {y})")]
    InvalidState { x: f64, y: f64 },
    #[error("argument outside its domain: {0}")]
    OutOfDomain(String),
    #[error("horizon of {steps} steps exceeds the cap of {cap}")]
    HorizonExceeded { steps: u64, cap: u64 },
    #[error("instance too large: {0}")]
    SizeCap(String),
    #[error("n * d = {0} is odd; half-edges cannot be perfectly paired")]
    OddHalfEdges(u64),
    #[error("fewer than two unused half-edges remain")]
    Exhausted,
    #[error("no simple graph after {attempts} attempts (observed simple fraction {simple_fraction})")]
    AttemptsExhausted { attempts: u64, simple_fraction: f64 },
    #[error("selection policy {0} is not supported here")]
    UnsupportedPolicy(&'static str),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
