use std::fmt;

/// Exit codes: 0 ok, 1 validation, 2 parse, 3 conversion, 4 training.
pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_PARSE: u8 = 2;
pub const EXIT_CONVERSION: u8 = 3;
pub const EXIT_TRAINING: u8 = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(EXIT_VALIDATION, message)
    }

    pub fn parse(message: impl Into<String>) -> Self {
        Self::new(EXIT_PARSE, message)
    }

    pub fn conversion(message: impl Into<String>) -> Self {
        Self::new(EXIT_CONVERSION, message)
    }

    pub fn training(message: impl Into<String>) -> Self {
        Self::new(EXIT_TRAINING, message)
    }

    pub fn io(what: &str, e: std::io::Error) -> Self {
        Self::validation(format!("{what}: {e}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}
