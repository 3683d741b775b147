use std::process::ExitCode;

/// Failure of a CLI command, split by exit code: configuration and input
/// validation problems exit with 2, everything else with 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn config(msg: impl Into<String>) -> CliError {
        CliError::Config(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(1),
        }
    }
}

impl From<swapbal_core::Error> for CliError {
    fn from(e: swapbal_core::Error) -> Self {
        use swapbal_core::Error as E;
        match e {
            E::Parse { .. }
            | E::OutOfBounds { .. }
            | E::InvalidLevel(_)
            | E::Input(_)
            | E::Action(_)
            | E::Shape { .. } => CliError::Config(e.to_string()),
            E::NonFinite(_) | E::Generation(_) | E::EpisodeDone => CliError::Runtime(e.into()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

/// Attaches a path-like context to core errors while keeping their class.
pub trait CoreContext<T> {
    fn ctx(self, what: impl std::fmt::Display) -> CliResult<T>;
}

impl<T> CoreContext<T> for Result<T, swapbal_core::Error> {
    fn ctx(self, what: impl std::fmt::Display) -> CliResult<T> {
        self.map_err(|e| match CliError::from(e) {
            CliError::Config(m) => CliError::Config(format!("{what}: {m}")),
            CliError::Runtime(e) => CliError::Runtime(e.context(what.to_string())),
        })
    }
}
