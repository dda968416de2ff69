use std::fmt;

use gravsweep_core::Error;

/// Process exit status for each failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Io = 1,
    Validation = 2,
    Numerical = 3,
    Determinism = 4,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub kind: Kind,
    pub message: String,
}

impl Failure {
    pub fn validation(message: impl Into<String>) -> Self {
        Failure {
            kind: Kind::Validation,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Failure {
            kind: Kind::Numerical,
            message: message.into(),
        }
    }

    pub fn determinism(message: impl Into<String>) -> Self {
        Failure {
            kind: Kind::Determinism,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Failure {
            kind: Kind::Io,
            message: message.into(),
        }
    }

    pub fn context(mut self, prefix: &str) -> Self {
        self.message = format!("{prefix}: {}", self.message);
        self
    }

    pub fn exit_code(&self) -> u8 {
        self.kind as u8
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Parameter errors are validation failures; everything else arises while
/// computing.
impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        match err {
            Error::InvalidParameter { .. } | Error::InvalidInterval { .. } => {
                Failure::validation(err.to_string())
            }
            _ => Failure::numerical(err.to_string()),
        }
    }
}
