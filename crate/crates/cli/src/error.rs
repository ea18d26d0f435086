use mcread_core::Error as CoreError;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("usage: {0}")]
    Usage(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    /// Category label and exit status.
    pub fn kind(&self) -> (&'static str, i32) {
        match self {
            CliError::Config(_) | CliError::Validation { .. } => ("config", 2),
            CliError::Usage(_) => ("usage", 2),
            CliError::Io(_) => ("io", 7),
            CliError::Core(e) => match e {
                CoreError::InvalidDimension { .. }
                | CoreError::DimensionMismatch { .. }
                | CoreError::DimensionOverflow { .. }
                | CoreError::InvalidParameter { .. }
                | CoreError::InvalidSchedule(_)
                | CoreError::InvalidProtocol(_)
                | CoreError::NotApplicable(_)
                | CoreError::OutOfRange { .. } => ("invalid_input", 3),
                CoreError::SingularDetuning(_)
                | CoreError::Singularity(_)
                | CoreError::StepTooLarge { .. }
                | CoreError::IntegratorInstability { .. } => ("numerical", 4),
                CoreError::FitFailure { .. } | CoreError::DegenerateFit(_) => ("fit", 5),
                CoreError::DegenerateWeights
                | CoreError::EmptyClass(_)
                | CoreError::IdenticalReferences => ("statistics", 6),
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind().1
    }

    pub fn to_json(&self) -> serde_json::Value {
        let (kind, code) = self.kind();
        let mut v = json!({ "error": kind, "message": self.to_string(), "exit_code": code });
        if let CliError::Validation { field, .. } = self {
            v["field"] = json!(field);
        }
        v
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
