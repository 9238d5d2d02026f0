use std::fmt;

use serde::Serialize;

/// Failure classes of the runner, each with its own process exit code.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Core(#[from] dqw_core::Error),

    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Validation => "validation",
            Self::Numerical => "numerical",
            Self::Io => "io",
        };
        f.write_str(s)
    }
}

impl AppError {
    pub fn io(path: impl fmt::Display, err: impl fmt::Display) -> Self {
        Self::Io { path: path.to_string(), message: err.to_string() }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn kind(&self) -> ErrorKind {
        use dqw_core::Error as E;
        match self {
            Self::Config(_) => ErrorKind::Validation,
            Self::Io { .. } => ErrorKind::Io,
            Self::Core(E::InvalidArgument(_) | E::DimensionMismatch { .. } | E::NotHermitian { .. }) => {
                ErrorKind::Validation
            }
            Self::Core(_) => ErrorKind::Numerical,
        }
    }

    /// 2 validation, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Validation => 2,
            ErrorKind::Numerical => 3,
            ErrorKind::Io => 4,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        if matches!(self, Self::Core(dqw_core::Error::NumericalInstability { .. })) {
            v["hint"] = "rerun with a smaller --dt".into();
        }
        v
    }
}

pub type AppResult<T> = Result<T, AppError>;
