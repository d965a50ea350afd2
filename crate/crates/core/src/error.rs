use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("charge neutrality violated: net charge {net:.3e} exceeds tolerance {tol:.3e}")]
    ChargeNeutrality { net: f64, tol: f64 },

    #[error("blow-up detected at t = {t}")]
    BlowUp { t: f64 },

    #[error("insufficient extrema: found {found} local maxima, need at least 3")]
    InsufficientExtrema { found: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
