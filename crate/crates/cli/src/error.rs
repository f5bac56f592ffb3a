use ncergo_core::Error as CoreError;
use thiserror::Error;

/// Failures of the harness, each with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("resource cap: {0}")]
    ResourceCap(String),
    #[error("fixture construction failed: {0}")]
    Fixture(String),
    #[error("computation failed: {0}")]
    Computation(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 0 is success and 1 a failed check; errors use 2 (config), 3 (resource cap),
    /// 4 (fixture) and 5 (I/O). A computation error counts as a failed check.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::ResourceCap(_) => 3,
            CliError::Fixture(_) => 4,
            CliError::Computation(_) => 1,
            CliError::Io { .. } => 5,
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Classifies a library error raised while building the fixture.
    pub fn fixture(e: CoreError) -> Self {
        match e {
            CoreError::ResourceCap { .. } => CliError::ResourceCap(e.to_string()),
            CoreError::DegenerateSystem(_) | CoreError::InvalidLpIndex(_) => CliError::Config(e.to_string()),
            _ => CliError::Fixture(e.to_string()),
        }
    }

    /// Classifies a library error raised while running an experiment.
    pub fn computation(e: CoreError) -> Self {
        match e {
            CoreError::ResourceCap { .. } => CliError::ResourceCap(e.to_string()),
            _ => CliError::Computation(e.to_string()),
        }
    }
}
