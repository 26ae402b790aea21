//! Library side of the command-line harness: instance file handling,
//! report assembly, and the verification driver shared with the
//! integration tests.

pub mod instance;
pub mod report;
pub mod verify;

/// Errors carrying the process exit code contract: 2 for usage and schema
/// problems, 3 for generation failures, 4 for violated mathematical
/// checks.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Schema(String),
    Generation(String),
    Math(String),
}

impl CliError {
    pub fn schema(message: String) -> Self {
        CliError::Schema(message)
    }

    pub fn from_core_schema(error: confmdp::Error) -> Self {
        CliError::Schema(error.to_string())
    }

    /// Maps a core error from a computation (rather than input parsing):
    /// contraction failures are generation errors, everything else is a
    /// violated mathematical check.
    pub fn from_core_math(error: confmdp::Error) -> Self {
        match error {
            confmdp::Error::ContractionUnreachable { .. } => {
                CliError::Generation(error.to_string())
            }
            other => CliError::Math(other.to_string()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Schema(_) => 2,
            CliError::Generation(_) => 3,
            CliError::Math(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m)
            | CliError::Schema(m)
            | CliError::Generation(m)
            | CliError::Math(m) => m,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message())
    }
}

impl std::error::Error for CliError {}
