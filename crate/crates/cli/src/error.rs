use std::path::PathBuf;
use std::process::ExitCode;

use maglev_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),

    #[error("unknown key '{key}'; valid keys: {valid}")]
    UnknownKey { key: String, valid: String },

    #[error("{0}")]
    Usage(String),

    #[error("stage '{stage}' aborted: {source}")]
    Stage {
        stage: String,
        #[source]
        source: CoreError,
    },

    #[error("{0}")]
    Core(#[from] CoreError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed manifest: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("figure '{tag}' needs the '{stage}' stage; enable it in run.stages and rerun")]
    MissingAnalysis { tag: String, stage: String },

    #[error("unknown figure '{tag}'; available: {available}")]
    UnknownFigure { tag: String, available: String },
}

fn core_code(e: &CoreError) -> u8 {
    match e {
        CoreError::Config(_)
        | CoreError::Domain(_)
        | CoreError::NearResonantDrive { .. }
        | CoreError::LockUnstable { .. }
        | CoreError::Unsatisfiable { .. }
        | CoreError::NoiselessMeasurement => 2,
        CoreError::Unstable { .. } | CoreError::ParticleLost { .. } | CoreError::LockLost { .. } | CoreError::AntiDamping { .. } => 3,
        CoreError::NonFinite { .. } | CoreError::FitFailure(_) | CoreError::CalibrationRejected(_) | CoreError::TooShort(_) => 4,
    }
}

impl CliError {
    pub fn stage(stage: &str, source: CoreError) -> Self {
        CliError::Stage {
            stage: stage.to_string(),
            source,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            CliError::Invalid(_)
            | CliError::UnknownKey { .. }
            | CliError::Usage(_)
            | CliError::Manifest { .. }
            | CliError::MissingAnalysis { .. }
            | CliError::UnknownFigure { .. } => 2,
            // configuration problems found while a stage runs stay config errors
            CliError::Stage { source, .. } => match core_code(source) {
                2 => 2,
                4 => 4,
                _ => 3,
            },
            CliError::Core(e) => core_code(e),
            CliError::Io { .. } => 1,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }
}
