//! The CLI error type: every failure carries a stable structured name (what
//! `stderr` leads with) and an exit code. Numerical failures — a non-finite
//! amplitude or field — exit 2; everything else exits 1.

use std::fmt;

use pilotwave::{
    ExperimentError, FieldError, GuidanceError, PropagatorError, SampleError,
};

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation: unknown subcommand, malformed flag, stray positional.
    Usage(String),
    /// A config key (file or flag) no subcommand parameter matches.
    UnknownKey { key: String, line: Option<usize> },
    /// A key's value failed to parse or violated a constraint.
    TypeError {
        key: String,
        line: Option<usize>,
        message: String,
    },
    /// A key is present but its value is missing.
    MissingRequired { key: String, line: Option<usize> },
    /// Domain validation rejected the resolved configuration or run.
    Invalid(String),
    /// Numerical failure: a non-finite value where the dynamics needs one.
    NonFinite(String),
    Io(String),
}

impl CliError {
    pub fn name(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "UsageError",
            CliError::UnknownKey { .. } => "UnknownKey",
            CliError::TypeError { .. } => "TypeError",
            CliError::MissingRequired { .. } => "MissingRequired",
            CliError::Invalid(_) => "InvalidConfig",
            CliError::NonFinite(_) => "NonFinite",
            CliError::Io(_) => "IoError",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NonFinite(_) => 2,
            _ => 1,
        }
    }
}

fn where_at(line: &Option<usize>) -> String {
    match line {
        Some(n) => format!(" (line {n})"),
        None => String::new(),
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::UnknownKey { key, line } => {
                write!(f, "unknown key `{key}`{}", where_at(line))
            }
            CliError::TypeError { key, line, message } => {
                write!(f, "key `{key}`{}: {message}", where_at(line))
            }
            CliError::MissingRequired { key, line } => {
                write!(f, "key `{key}`{} has no value", where_at(line))
            }
            CliError::Invalid(m) | CliError::NonFinite(m) | CliError::Io(m) => {
                write!(f, "{m}")
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        match e {
            FieldError::NonFinite => CliError::NonFinite(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<PropagatorError> for CliError {
    fn from(e: PropagatorError) -> Self {
        match e {
            PropagatorError::NonFinite { .. } => CliError::NonFinite(e.to_string()),
            PropagatorError::Field(inner) => inner.into(),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<GuidanceError> for CliError {
    fn from(e: GuidanceError) -> Self {
        match e {
            GuidanceError::Field(inner) => inner.into(),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<SampleError> for CliError {
    fn from(e: SampleError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Propagator(inner) => inner.into(),
            ExperimentError::Guidance(inner) => inner.into(),
            ExperimentError::Field(inner) => inner.into(),
            ExperimentError::Sample(inner) => inner.into(),
            other => CliError::Invalid(other.to_string()),
        }
    }
}
