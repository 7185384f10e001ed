use std::fmt;

use cryozssr::Error;

/// Machine-parsable failure class printed as the first token of the error line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Io,
    Numeric,
}

impl ErrorClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorClass::Config => "config_error",
            ErrorClass::Io => "io_error",
            ErrorClass::Numeric => "numeric_error",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Io => 3,
            ErrorClass::Numeric => 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CliError {
    pub class: ErrorClass,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { class: ErrorClass::Config, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self { class: ErrorClass::Io, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // one line, whatever the payload
        let msg = self.message.replace('\n', " ");
        write!(f, "{}: {msg}", self.class.as_str())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let class = match e {
            Error::Argument(_) => ErrorClass::Config,
            Error::Io { .. } | Error::UnsupportedFormat { .. } | Error::Checkpoint(_) => ErrorClass::Io,
            Error::Dimension(_)
            | Error::Range(_)
            | Error::DegenerateCorrelation(_)
            | Error::NonFiniteLoss { .. } => ErrorClass::Numeric,
        };
        Self { class, message: e.to_string() }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_errors_map_to_classes() {
        let nan = CliError::from(Error::NonFiniteLoss { step: 3, lr: 1e-3, loss: f64::NAN });
        assert_eq!(nan.class, ErrorClass::Numeric);
        assert!(nan.to_string().starts_with("numeric_error: "));
        assert_eq!(CliError::from(Error::Checkpoint("x".into())).class, ErrorClass::Io);
        assert_eq!(CliError::from(Error::Argument("x".into())).class, ErrorClass::Config);
    }

    #[test]
    fn display_is_one_line() {
        assert_eq!(CliError::io("a\nb").to_string(), "io_error: a b");
    }
}
