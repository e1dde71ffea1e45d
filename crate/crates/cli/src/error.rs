use std::fmt;

/// Two failure classes with distinct exit codes: bad input (2) and a run
/// that could not finish (3).
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl From<abckit::Error> for CliError {
    fn from(e: abckit::Error) -> Self {
        use abckit::Error::*;
        match e {
            // Everything the user could have written differently.
            InvalidConfig(_) | DimensionMismatch { .. } | NonNestedPlan { .. }
            | OutsideRegion { .. } | SeriesTooShort { .. } => CliError::Config(e.to_string()),
            // Failures of the run itself.
            NumericalBlowup { .. } | DegenerateDesign | DegenerateSample
            | SampleTooSmall { .. } => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o failure: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
