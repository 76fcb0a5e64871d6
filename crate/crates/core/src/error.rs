use std::path::PathBuf;

use crate::training::TrainRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("integration diverged at t = {step}")]
    IntegrationDiverged { step: usize },

    #[error("innovation covariance is not positive definite")]
    SingularInnovation,

    #[error("operation requires a {expected} model, got {found}")]
    KindMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("not found: {}", .0.display())]
    NotFound(PathBuf),

    #[error("malformed {what}: {reason}")]
    Malformed { what: String, reason: String },

    #[error("training diverged at epoch {epoch} (non-finite loss or gradient)")]
    DivergedTraining {
        epoch: usize,
        record: Box<TrainRecord>,
    },

    #[error("unknown system `{0}` (expected springs, pendulum or vdp)")]
    UnknownSystem(String),

    #[error("unknown architecture `{0}` (expected ern, jrn, elstm or jlstm)")]
    UnknownArch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn malformed(what: impl Into<String>, reason: impl ToString) -> Self {
        Error::Malformed {
            what: what.into(),
            reason: reason.to_string(),
        }
    }

    /// Process exit status for the command-line driver: 1 usage, 2 I/O, 3 numerical divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::IntegrationDiverged { .. }
            | Error::SingularInnovation
            | Error::DivergedTraining { .. } => 3,
            Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_)
            | Error::NotFound(_)
            | Error::Malformed { .. }
            | Error::DimensionMismatch(_) => 2,
            Error::InvalidModel(_)
            | Error::KindMismatch { .. }
            | Error::ShapeMismatch(_)
            | Error::UnknownSystem(_)
            | Error::UnknownArch(_)
            | Error::InvalidConfig(_) => 1,
        }
    }
}
