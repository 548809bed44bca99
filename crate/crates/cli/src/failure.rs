use std::fmt;
use std::path::Path;

use qglab_core::Error;

/// Exit categories: usage errors are handled by clap (exit 2).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Category {
    Io,
    Data,
    Invalid,
    Internal,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Io => 3,
            Category::Data => 4,
            Category::Invalid | Category::Internal => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Category::Io => "io",
            Category::Data => "data",
            Category::Invalid => "invalid",
            Category::Internal => "internal",
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub category: Category,
    pub message: String,
}

impl Failure {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Failure {
            category: Category::Io,
            message: format!("{}: {e}", path.display()),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Failure {
            category: Category::Data,
            message: message.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Failure {
            category: Category::Invalid,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // One line, so scripts can split on the first `: `.
        let msg = self.message.replace('\n', " ");
        write!(f, "error[{}]: {msg}", self.category.label())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let category = match &e {
            Error::Io { .. } => Category::Io,
            Error::Data { .. } | Error::Format(_) | Error::Json(_) | Error::CheckpointIncompatible { .. } => {
                Category::Data
            }
            Error::Csv(_) => Category::Io,
            Error::InvalidArgument(_) | Error::UndefinedMean | Error::UndefinedStats => Category::Invalid,
        };
        Failure {
            category,
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure {
            category: Category::Internal,
            message: e.to_string(),
        }
    }
}
