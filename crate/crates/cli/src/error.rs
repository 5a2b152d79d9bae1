use std::path::PathBuf;

use serde_json::{json, Value};
use thiserror::Error;

/// Process exit statuses.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const GATE: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{source_name}{}: {message}", location(*line, *column))]
    Parse {
        source_name: String,
        line: Option<usize>,
        column: Option<usize>,
        message: String,
    },

    #[error("invalid `{field}`: {constraint}{}", value.map(|v| format!(" (got {v:e})")).unwrap_or_default())]
    Validation {
        field: &'static str,
        constraint: &'static str,
        value: Option<f64>,
    },

    #[error("unknown preset `{name}` (available: {available})")]
    UnknownPreset { name: String, available: String },

    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] optoforce_core::Error),

    #[error(transparent)]
    Quantum(#[from] optoforce_quantum::Error),

    #[error("gate `{gate}` failed: {message}")]
    Gate { gate: String, message: String },
}

fn location(line: Option<usize>, column: Option<usize>) -> String {
    match (line, column) {
        (Some(l), Some(c)) => format!(" at line {l}, column {c}"),
        (Some(l), None) => format!(" at line {l}"),
        _ => String::new(),
    }
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Parse { .. } => "ParseError",
            CliError::Validation { .. } | CliError::UnknownPreset { .. } => "ValidationError",
            CliError::Io { .. } => "IoError",
            CliError::Core(_) | CliError::Quantum(_) => {
                if self.exit_code() == exit::CONFIG {
                    "ValidationError"
                } else {
                    "NumericalError"
                }
            }
            CliError::Gate { .. } => "GateFailure",
        }
    }

    pub fn exit_code(&self) -> i32 {
        use optoforce_core::Error as C;
        use optoforce_quantum::Error as Q;
        let core_code = |e: &C| match e {
            C::InvalidParameter { .. } => exit::CONFIG,
            _ => exit::NUMERICAL,
        };
        match self {
            CliError::Parse { .. } | CliError::Validation { .. } | CliError::UnknownPreset { .. } => exit::CONFIG,
            CliError::Io { .. } => exit::IO,
            CliError::Core(e) => core_code(e),
            CliError::Quantum(e) => match e {
                Q::GridTooSmall { .. } | Q::GridTooCoarse { .. } | Q::TimeStep { .. } | Q::InvalidParameter { .. } => {
                    exit::CONFIG
                }
                Q::Core(c) => core_code(c),
                _ => exit::NUMERICAL,
            },
            CliError::Gate { .. } => exit::GATE,
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        match self {
            CliError::Parse { source_name, line, column, .. } => {
                v["source"] = json!(source_name);
                v["line"] = json!(line);
                v["column"] = json!(column);
            }
            CliError::Validation { field, constraint, value } => {
                v["field"] = json!(field);
                v["constraint"] = json!(constraint);
                v["value"] = json!(value);
            }
            CliError::Gate { gate, .. } => v["gate"] = json!(gate),
            _ => {}
        }
        v
    }
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, e: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            message: e.to_string(),
        }
    }
}
