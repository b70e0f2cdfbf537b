use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent configuration. `key` names the offending
    /// setting when there is one.
    #[error("configuration error{}: {message}", key.as_ref().map(|k| format!(" in `{k}`")).unwrap_or_default())]
    Config { key: Option<String>, message: String },

    #[error("degenerate cell {cell}: jacobian determinant {det:e}")]
    DegenerateCell { cell: usize, det: f64 },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("singular linear system")]
    SingularSystem,

    #[error("inaccurate linear solve: relative residual {relative_residual:e}")]
    InaccurateSolve { relative_residual: f64 },

    #[error("Picard iteration did not converge in {iterations} iterations (last residual {residual:e})")]
    PicardDiverged { iterations: usize, residual: f64 },

    #[error("level {level}, nu {nu:e}, step {step}: {source}")]
    Run {
        level: usize,
        nu: f64,
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(message: impl Into<String>) -> Self {
        Error::Config { key: None, message: message.into() }
    }

    pub(crate) fn config_key(key: &str, message: impl Into<String>) -> Self {
        Error::Config { key: Some(key.to_string()), message: message.into() }
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. })
    }
}
