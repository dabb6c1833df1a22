//! Filesystem plumbing, pipeline orchestration and the command-line front
//! end around `twinforge-core`: dataset storage, portable model files,
//! JSON configuration, CSV/SVG reporting and the speed benchmark.

pub mod bench;
pub mod config;
pub mod model_file;
pub mod pipeline;
pub mod report;
pub mod store;

pub use config::PipelineConfig;
pub use store::Store;

/// Top-level failure classes mapped onto process exit codes: validation
/// problems exit 1, stage failures exit 2.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("invalid input: {0}")]
    Validation(#[source] anyhow::Error),
    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: anyhow::Error,
    },
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Validation(_) => 1,
            AppError::Stage { .. } => 2,
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;
