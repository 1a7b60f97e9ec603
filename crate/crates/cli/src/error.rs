use serde_json::json;
use wva_core::WvaError;

/// Failures that end a run, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    /// Malformed scenario file.
    Parse {
        message: String,
        line: usize,
        column: usize,
    },
    /// Scenario file that cannot be read at all.
    Unreadable(String),
    /// Inputs that parse but cannot be run.
    Precondition(Vec<String>),
    /// A numeric routine gave up.
    Convergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse { .. } | CliError::Unreadable(_) => 2,
            CliError::Precondition(_) => 3,
            CliError::Convergence(_) => 4,
        }
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        CliError::Precondition(vec![msg.into()])
    }

    pub fn to_json(&self, file: &str) -> serde_json::Value {
        match self {
            CliError::Parse {
                message,
                line,
                column,
            } => json!({
                "error": "parse",
                "file": file,
                "line": line,
                "column": column,
                "message": format!("{file}:{line}:{column}: {message}"),
            }),
            CliError::Unreadable(message) => json!({
                "error": "parse",
                "file": file,
                "message": format!("{file}: {message}"),
            }),
            CliError::Precondition(problems) => json!({
                "error": "precondition",
                "file": file,
                "message": problems.join("; "),
                "problems": problems,
            }),
            CliError::Convergence(message) => json!({
                "error": "convergence",
                "file": file,
                "message": message,
            }),
        }
    }
}

impl From<WvaError> for CliError {
    fn from(e: WvaError) -> Self {
        if e.is_convergence() {
            CliError::Convergence(e.to_string())
        } else {
            CliError::Precondition(vec![e.to_string()])
        }
    }
}
