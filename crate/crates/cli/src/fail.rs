//! Failures reported as one JSON object on standard error.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    MissingInput,
    Schema,
    Usage,
    Conformance,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: Kind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Serialize)]
pub struct Report {
    pub kind: String,
    pub message: String,
}

impl Report {
    pub fn from_error(err: &anyhow::Error) -> Self {
        let kind = if let Some(c) = err.downcast_ref::<CliError>() {
            serde_json::to_value(c.kind)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_else(|| "error".into())
        } else if let Some(e) = err.downcast_ref::<emoxai::Error>() {
            e.kind().to_string()
        } else if err.downcast_ref::<std::io::Error>().is_some() {
            "io".into()
        } else {
            "error".into()
        };
        Self {
            kind,
            message: format!("{err:#}"),
        }
    }
}
