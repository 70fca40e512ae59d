use thiserror::Error;

/// Crate-wide error type.
///
/// Variants split into two groups that the CLI maps to process exit codes:
/// validation problems (bad parameters, configs, or input files) exit with 1,
/// runtime and fit failures exit with 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("undefined estimate: {0}")]
    UndefinedEstimate(String),

    #[error("moment-infeasible sample: {0}")]
    MomentInfeasible(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("calibration undefined: {0}")]
    CalibrationUndefined(String),

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Exit code the CLI uses when this error reaches `main`.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_)
            | Error::InvalidConfig(_)
            | Error::ContractViolation(_)
            | Error::Parse { .. }
            | Error::InvalidInput(_)
            | Error::UndefinedEstimate(_) => 1,
            Error::MomentInfeasible(_)
            | Error::DegenerateSample(_)
            | Error::CalibrationUndefined(_)
            | Error::FitFailed(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
