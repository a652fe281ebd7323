use std::path::{Path, PathBuf};

use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{context}: {source}")]
    Core { context: String, source: twinbeam::Error },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn core(context: impl Into<String>, source: twinbeam::Error) -> Self {
        CliError::Core { context: context.into(), source }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        use twinbeam::Error as E;
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Core { source, .. } => match source {
                E::Domain(_) => "config",
                E::Io(_) => "io",
                E::Format(_) | E::LengthMismatch { .. } => "format",
                E::InsufficientData { .. } | E::InsufficientSeed { .. } | E::Empty => "insufficient_data",
                E::ZeroVariance => "zero_variance",
                E::Internal(_) => "internal",
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "usage" | "config" => 2,
            "io" | "format" => 3,
            "insufficient_data" | "zero_variance" => 4,
            _ => 5,
        }
    }

    /// `error kind=<kind> exit=<code>: <message>` on a single line.
    pub fn line(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("error kind={} exit={}: {}", self.kind(), self.exit_code(), msg.trim())
    }
}

pub(crate) trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> CliResult<T>;
}

impl<T> Context<T> for twinbeam::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> CliResult<T> {
        self.map_err(|e| CliError::core(what(), e))
    }
}
