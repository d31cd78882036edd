use thiserror::Error;

use crate::sdp::SdpStatus;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("SOS half-degree {given} is too small, at least {required} is needed")]
    DegreeTooSmall { given: u32, required: u32 },

    #[error("SDP has {count} scalar variables, above the cap of {cap}")]
    ProblemTooLarge { count: usize, cap: usize },

    #[error("SDP solve ended with status {status:?} ({context})")]
    Solver { status: SdpStatus, context: String },

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("measurement at step {step} is inconsistent with the model and noise bounds")]
    InconsistentMeasurement { step: usize },

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dims(context: &'static str, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            found,
        }
    }
}
