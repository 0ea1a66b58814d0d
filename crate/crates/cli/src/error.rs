use std::path::PathBuf;

use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error{}: {message}", key.as_ref().map(|k| format!(" in `{k}`")).unwrap_or_default())]
    Config {
        message: String,
        key: Option<String>,
        line: Option<usize>,
    },
    #[error("missing prerequisite artifacts: {}", .missing.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    Prerequisite { missing: Vec<PathBuf> },
    #[error(transparent)]
    Core(#[from] surrokit::Error),
    #[error("{0}")]
    Internal(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use surrokit::Error as E;
        match self {
            CliError::Config { .. } => 2,
            CliError::Prerequisite { .. } => 3,
            CliError::Core(e) => match e {
                E::Config(_) | E::Kinematics(_) => 2,
                E::Divergence { .. } | E::TrainingDiverged { .. } | E::Degenerate(_) | E::UndefinedCorrelation(_) => 4,
                _ => 5,
            },
            CliError::Internal(_) => 5,
        }
    }

    pub fn kind(&self) -> &'static str {
        use surrokit::Error as E;
        match self {
            CliError::Config { .. } => "configuration",
            CliError::Prerequisite { .. } => "prerequisite",
            CliError::Core(e) => match e {
                E::Config(_) | E::Kinematics(_) => "configuration",
                E::Divergence { .. } => "divergence",
                E::TrainingDiverged { .. } | E::Degenerate(_) | E::UndefinedCorrelation(_) => "training",
                _ => "internal",
            },
            CliError::Internal(_) => "internal",
        }
    }

    /// One-line JSON error record for stderr.
    pub fn record(&self) -> serde_json::Value {
        let mut v = json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        match self {
            CliError::Config { key, line, .. } => {
                v["key"] = json!(key);
                v["line"] = json!(line);
            }
            CliError::Prerequisite { missing } => {
                v["missing"] = json!(missing.iter().map(|p| p.display().to_string()).collect::<Vec<_>>());
            }
            CliError::Core(surrokit::Error::Divergence { step, time, .. }) => {
                v["step"] = json!(step);
                v["time"] = json!(time);
            }
            _ => {}
        }
        v
    }
}
