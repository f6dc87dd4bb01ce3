use std::path::Path;

use envelop_core::Error as CoreError;

/// Validation or verification came back negative.
pub const EXIT_FAILED: i32 = 1;
/// Bad configuration, unreadable input or unwritable output.
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{0}")]
    Usage(String),
    /// A report was produced and written but is not ok.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn parse(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Parse {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Usage(_) => "usage",
            CliError::Failed(_) => "failed",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_)
            | CliError::Core(
                CoreError::Invariant(_) | CoreError::Degenerate(_) | CoreError::DegenerateEvidence,
            ) => EXIT_FAILED,
            _ => EXIT_CONFIG,
        }
    }

    /// Single-line JSON for the error stream.
    pub fn diagnostic(&self) -> String {
        serde_json::json!({
            "level": "error",
            "kind": self.kind(),
            "exit": self.exit_code(),
            "message": self.to_string(),
        })
        .to_string()
    }
}
