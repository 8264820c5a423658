use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("payload must be at least 1 byte")]
    ZeroPayload,

    #[error("payload of {payload} bytes would fragment (largest unfragmented payload is {limit})")]
    WouldFragment { payload: u32, limit: u32 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("packet size {size} bytes is above the critical size {p_c} bytes (not in the saturated regime)")]
    OutsideSaturatedRegime { size: f64, p_c: f64 },

    #[error("step size {dt} too large for the quadratic term (must be below {limit})")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("degenerate fit: {0}")]
    FitDegenerate(String),

    #[error("series and fit do not share a size domain")]
    DomainMismatch,

    #[error("malformed CSV at row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },

    #[error("socket {op} failed: {source}")]
    Socket {
        op: &'static str,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn socket(op: &'static str) -> impl FnOnce(io::Error) -> Self {
        move |source| Error::Socket { op, source }
    }
}
