use std::fmt;

use serde::Serialize;
use serde_json::json;

/// One invalid configuration field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration; exit status 2.
    Validation(Vec<FieldError>),
    /// A stage failed while running; exit status 1.
    Runtime { stage: String, message: String },
}

impl CliError {
    pub fn runtime(stage: impl Into<String>, err: impl fmt::Display) -> Self {
        CliError::Runtime {
            stage: stage.into(),
            message: err.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime { .. } => 1,
        }
    }

    /// Machine-readable record printed to stderr and written as
    /// `error.json` when the output directory is usable.
    pub fn record(&self, command: &str) -> serde_json::Value {
        match self {
            CliError::Validation(fields) => json!({
                "status": "error",
                "kind": "validation",
                "command": command,
                "fields": fields,
            }),
            CliError::Runtime { stage, message } => json!({
                "status": "error",
                "kind": "runtime",
                "command": command,
                "stage": stage,
                "message": message,
            }),
        }
    }
}

impl From<Vec<FieldError>> for CliError {
    fn from(v: Vec<FieldError>) -> Self {
        CliError::Validation(v)
    }
}

impl From<FieldError> for CliError {
    fn from(v: FieldError) -> Self {
        CliError::Validation(vec![v])
    }
}

/// Attaches a stage name to core errors.
pub trait Stage<T> {
    fn stage(self, name: &str) -> Result<T, CliError>;
}

impl<T, E: fmt::Display> Stage<T> for Result<T, E> {
    fn stage(self, name: &str) -> Result<T, CliError> {
        self.map_err(|e| CliError::runtime(name, e))
    }
}
