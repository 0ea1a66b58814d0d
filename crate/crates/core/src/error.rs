use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch at layer {layer}: expected {expected}, got {got}")]
    Shape {
        layer: usize,
        expected: usize,
        got: usize,
    },

    /// Non-finite state after a time step; carries the last finite snapshot.
    #[error("solution diverged at step {step} (t = {time})")]
    Divergence {
        step: usize,
        time: f64,
        last_finite: Vec<f64>,
    },

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    TrainingDiverged { epoch: usize },

    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("kinematics error: {0}")]
    Kinematics(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("implementation error: {0}")]
    Implementation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(offset: usize, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::Config(message.into())
    }
}
