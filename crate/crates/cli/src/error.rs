use std::path::{Path, PathBuf};

use occbench::compositor::RenderError;
use occbench::masking::MaskError;
use occbench::{ModelError, OccluderError, PlanError, ReportError};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Occluder(#[from] OccluderError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error("{0}")]
    Input(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "ConfigError",
            CliError::Io { .. } => "IoError",
            CliError::Model(e) => e.kind(),
            CliError::Occluder(e) => e.kind(),
            CliError::Plan(e) => e.kind(),
            CliError::Render(e) => e.kind(),
            CliError::Report(e) => e.kind(),
            CliError::Mask(e) => e.kind(),
            CliError::Input(_) => "InputError",
        }
    }
}

/// One entry of the machine-readable error list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Failure {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub video_id: Option<String>,
    pub kind: String,
    pub message: String,
}

impl Failure {
    pub fn new(video_id: Option<&str>, err: &CliError) -> Self {
        Self {
            video_id: video_id.map(str::to_string),
            kind: err.kind().to_string(),
            message: err.to_string(),
        }
    }
}

pub fn error_list_json(failures: &[Failure]) -> String {
    serde_json::to_string_pretty(&serde_json::json!({ "errors": failures }))
        .expect("error list serialization cannot fail")
}
