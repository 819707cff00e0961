use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid waveform: {0}")]
    Waveform(String),

    #[error("step size underflow at t = {t:e} s after {substeps} sub-steps")]
    StepUnderflow { t: f64, substeps: usize },

    #[error("traces are not time-aligned: {0}")]
    Misaligned(String),

    #[error("fit input rejected: {0}")]
    FitInput(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
