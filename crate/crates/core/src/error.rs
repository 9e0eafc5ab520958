use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("integration failed at t = {t} ps: {reason}")]
    Integration { t: f64, reason: String },

    #[error("trajectory has not decayed (residual excitation {residual:e})")]
    NotDecayed { residual: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("no resonance found between {lo} nm and {hi} nm")]
    NoResonance { lo: f64, hi: f64 },

    #[error("no interior maximum: {0}")]
    NoMaximum(String),

    #[error("photon cutoff not converged: {base} vs {refined} with one more photon")]
    Truncation { base: f64, refined: f64 },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of the numerics rather than of the caller's inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Integration { .. }
                | Error::NotDecayed { .. }
                | Error::Fit(_)
                | Error::NoResonance { .. }
                | Error::NoMaximum(_)
                | Error::Truncation { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
