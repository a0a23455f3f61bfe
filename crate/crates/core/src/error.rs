use thiserror::Error;

/// Errors raised by the simulation and modeling operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown stimulus label `{0}` (expected one of N, A1, A2, A3, B1, B2, B3)")]
    UnknownStimulus(String),

    #[error("unknown material `{0}`")]
    UnknownMaterial(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{quantity} = {value} outside valid range [{min}, {max}]")]
    OutOfRange {
        quantity: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("target pressure {target_kpa} kPa exceeds the 12 kPa validated range: the tube deforms unevenly above 12 kPa")]
    PressureAboveValidated { target_kpa: f64 },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("timestamps must be strictly increasing (sample {index})")]
    NonMonotonicTime { index: usize },

    #[error("Nyquist violation: peak drive frequency {freq_hz:.3} Hz exceeds half the sample rate ({nyquist_hz:.3} Hz)")]
    Nyquist { freq_hz: f64, nyquist_hz: f64 },

    #[error("no rating entry for ({material}, {stimulus})")]
    UnknownRating { material: String, stimulus: String },

    #[error("rating table invalid: {0}")]
    RatingTable(String),

    #[error("physical and virtual materials must differ (got {0} twice)")]
    IdentitySubstitution(String),

    #[error("i/o: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<hound::Error> for Error {
    fn from(e: hound::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_range(quantity: &'static str, value: f64, min: f64, max: f64) -> Result<()> {
    if value.is_finite() && value >= min && value <= max {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            quantity,
            value,
            min,
            max,
        })
    }
}
