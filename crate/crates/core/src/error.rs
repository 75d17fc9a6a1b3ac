use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("spin index {index} out of range for a {n_spins}-spin system")]
    SpinIndex { index: usize, n_spins: usize },

    #[error("invalid spin system: {0}")]
    InvalidSystem(String),

    #[error("operation needs at least {required} spins, system has {got}")]
    TooFewSpins { required: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("negative delay at gap {index}: {delay_s:e} s")]
    NegativeDelay { index: usize, delay_s: f64 },

    #[error("unrealizable sequence: {0}")]
    Unrealizable(String),

    #[error("invalid scheme: {0}")]
    InvalidScheme(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sequence duration must be positive, got {0:e} s")]
    NonPositiveDuration(f64),

    #[error("event {index} is a finite-width pulse; only ideal pulses are supported here")]
    FinitePulse { index: usize },

    #[error("event {index} is not a π pulse (flip angle {angle} rad)")]
    NonPiPulse { index: usize, angle: f64 },

    #[error("time grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("static noise has no finite spectral density")]
    StaticSpectrum,

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("malformed sequence dump at line {line}: {message}")]
    Dump { line: usize, message: String },

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
}
