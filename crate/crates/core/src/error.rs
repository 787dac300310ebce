use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The input is not a physical (bona fide) state or form.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical procedure failed to reach the requested accuracy.
    #[error("numeric error: {msg} (achieved {achieved:e})")]
    Numeric { msg: String, achieved: f64 },

    /// Truncated sums lost more probability mass than allowed.
    #[error("truncation error: {msg} (deficit {deficit:e})")]
    Truncation { msg: String, deficit: f64 },

    /// A table or Fock state does not extend far enough for the requested map.
    #[error("cutoff error: {0}")]
    Cutoff(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    /// Two independent computations disagree structurally.
    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn numeric(msg: impl Into<String>, achieved: f64) -> Self {
        Error::Numeric {
            msg: msg.into(),
            achieved,
        }
    }

    /// Same error with `ctx` (typically a grid point) prefixed to its message.
    pub fn at(self, ctx: &str) -> Self {
        match self {
            Error::Parameter(m) => Error::Parameter(format!("{ctx}: {m}")),
            Error::Domain(m) => Error::Domain(format!("{ctx}: {m}")),
            Error::Numeric { msg, achieved } => Error::Numeric {
                msg: format!("{ctx}: {msg}"),
                achieved,
            },
            Error::Truncation { msg, deficit } => Error::Truncation {
                msg: format!("{ctx}: {msg}"),
                deficit,
            },
            Error::Cutoff(m) => Error::Cutoff(format!("{ctx}: {m}")),
            Error::Sampling(m) => Error::Sampling(format!("{ctx}: {m}")),
            Error::Consistency(m) => Error::Consistency(format!("{ctx}: {m}")),
            other => other,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) | Error::Json(_) => 2,
            Error::Io(_) | Error::Csv(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
