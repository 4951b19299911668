use std::path::PathBuf;

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum PearError {
    #[error(transparent)]
    Core(#[from] pear_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
}

impl PearError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PearError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn csv(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        PearError::Csv {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PearError::Core(_) => "core",
            PearError::Io { .. } => "io",
            PearError::Csv { .. } => "csv",
            PearError::Json { .. } => "json",
            PearError::Config(_) => "config",
        }
    }

    /// The machine-readable form printed by the CLI on failure.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            error: &'a str,
            message: String,
            #[serde(skip_serializing_if = "Option::is_none")]
            problems: Option<&'a [String]>,
        }
        let problems = match self {
            PearError::Config(p) => Some(p.as_slice()),
            _ => None,
        };
        serde_json::to_string(&Report {
            error: self.kind(),
            message: self.to_string(),
            problems,
        })
        .expect("error report serializes")
    }
}

pub type Result<T> = std::result::Result<T, PearError>;
