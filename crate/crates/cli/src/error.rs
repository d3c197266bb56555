use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid spec `{spec}`: {message}")]
pub struct SpecError {
    pub spec: String,
    pub message: String,
}

impl SpecError {
    pub fn new(spec: &str, message: impl Into<String>) -> Self {
        Self {
            spec: spec.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error{}: field `{field}`: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config {
        line: Option<usize>,
        field: String,
        message: String,
    },
    #[error("solver aborted: {0}")]
    Solver(#[from] convrate::Error),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed trace file {}: {message}", path.display())]
    TraceFormat { path: PathBuf, message: String },
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            line: None,
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for configuration problems, 3 for solver and I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Solver(convrate::Error::StepTooCoarse { .. }) => 2,
            CliError::Solver(_) | CliError::Io { .. } | CliError::TraceFormat { .. } => 3,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
