use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("malformed dataset under {}: {}", root.display(), problems.join("; "))]
    Manifest { root: PathBuf, problems: Vec<String> },
    #[error("missing predictions for {} frame(s): {}", missing.len(), missing.join(", "))]
    MissingPredictions { missing: Vec<String> },
    #[error("ambiguous prediction for {frame}: {}", candidates.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    AmbiguousPrediction { frame: String, candidates: Vec<PathBuf> },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot decode image {}: {message}", path.display())]
    Image { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{context}: {source}")]
    Frame { context: String, source: vcod_core::Error },
    #[error(transparent)]
    Core(#[from] vcod_core::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Manifest { .. } => "manifest",
            Self::MissingPredictions { .. } => "missing_predictions",
            Self::AmbiguousPrediction { .. } => "ambiguous_prediction",
            Self::Config(_) => "config",
            Self::Image { .. } => "image",
            Self::Io { .. } => "io",
            Self::Frame { source, .. } | Self::Core(source) => match source {
                vcod_core::Error::Divergence { .. } => "divergence",
                vcod_core::Error::Dimension(_) => "dimension",
                vcod_core::Error::Format(_) => "format",
                _ => "core",
            },
        }
    }

    /// Machine-readable error record for the CLI.
    pub fn record(&self) -> serde_json::Value {
        let details: Vec<String> = match self {
            Self::Manifest { problems, .. } => problems.clone(),
            Self::MissingPredictions { missing } => missing.clone(),
            Self::AmbiguousPrediction { candidates, .. } => {
                candidates.iter().map(|p| p.display().to_string()).collect()
            }
            _ => Vec::new(),
        };
        json!({ "error": { "kind": self.kind(), "message": self.to_string(), "details": details } })
    }
}
