use std::io;
use std::path::PathBuf;

use gasfc_core::Error as CoreError;

/// Process exit codes. Stable across releases.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const SCHEMA: i32 = 2;
    pub const DIVERGENCE: i32 = 3;
    pub const SCENARIO_GAP: i32 = 4;
    pub const CHECKPOINT: i32 = 5;
    pub const MISSING_FLAG: i32 = 6;
}

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{}: header does not match the expected columns (missing: [{}]; unexpected: [{}])",
        path.display(), missing.join(", "), unexpected.join(", "))]
    Schema {
        path: PathBuf,
        missing: Vec<String>,
        unexpected: Vec<String>,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("checkpoint {}: {reason}", path.display())]
    Checkpoint { path: PathBuf, reason: String },

    #[error("missing required option {flag}: {explanation}")]
    MissingFlag {
        flag: &'static str,
        explanation: &'static str,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Schema { .. } | AppError::Parse { .. } => exit::SCHEMA,
            AppError::Checkpoint { .. } => exit::CHECKPOINT,
            AppError::MissingFlag { .. } => exit::MISSING_FLAG,
            AppError::Core(CoreError::Diverged { .. } | CoreError::NanGradient { .. }) => {
                exit::DIVERGENCE
            }
            AppError::Core(CoreError::ScenarioGap { .. }) => exit::SCENARIO_GAP,
            _ => exit::FAILURE,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Self {
        let path = path.into();
        move |source| AppError::Io { path, source }
    }

    /// Extra lines worth printing after the headline message.
    pub fn details(&self) -> Vec<String> {
        match self {
            AppError::Core(CoreError::Diverged {
                last_finite: Some(row),
                ..
            }) => vec![format!(
                "last finite log row: iteration {}, train_rmse {}, train_mae {}",
                row.iteration, row.train_rmse, row.train_mae
            )],
            AppError::Core(CoreError::ScenarioGap { missing }) => missing
                .iter()
                .map(|(feature, year)| format!("missing {feature} for {year}"))
                .collect(),
            _ => Vec::new(),
        }
    }
}

pub type Result<T, E = AppError> = std::result::Result<T, E>;
