use std::fmt;
use std::path::Path;

/// A failure reported as `error[CODE]: message`.
#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::new("E_IO", format!("{}: {e}", path.display()))
    }

    pub fn usage(message: impl Into<String>) -> Self {
        CliError::new("E_USAGE", message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // One line, whatever the underlying message contained.
        let msg = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        write!(f, "error[{}]: {msg}", self.code)
    }
}

impl From<socgat::Error> for CliError {
    fn from(e: socgat::Error) -> Self {
        CliError::new(e.code(), e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::new("E_JSON", e.to_string())
    }
}
