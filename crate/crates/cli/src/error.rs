use std::process::ExitCode;

/// Failure classes with fixed exit codes: usage 1, unreadable or malformed
/// data 2, a computation stage giving up 3.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(anyhow::Error),
    Stage { stage: String, cause: anyhow::Error },
}

impl CliError {
    pub fn data(err: impl Into<anyhow::Error>) -> CliError {
        CliError::Data(err.into())
    }

    pub fn stage(stage: impl Into<String>, err: impl Into<anyhow::Error>) -> CliError {
        CliError::Stage {
            stage: stage.into(),
            cause: err.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(1),
            CliError::Data(_) => ExitCode::from(2),
            CliError::Stage { .. } => ExitCode::from(3),
        }
    }

    pub fn report(&self) -> String {
        match self {
            CliError::Usage(msg) => format!("usage error: {msg}"),
            CliError::Data(err) => format!("data error: {err:#}"),
            CliError::Stage { stage, cause } => format!("stage '{stage}' failed: {cause:#}"),
        }
    }
}
