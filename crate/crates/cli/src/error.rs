use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use twosort_core::{KernelError, ModelError};

/// Everything the driver can fail with. Each variant maps to one exit code.
#[derive(Debug)]
pub enum CliError {
    Io { path: PathBuf, err: io::Error },
    /// Malformed JSON or a file that does not follow its format.
    Format { path: String, msg: String },
    Usage(String),
    Kernel { context: String, err: KernelError },
    Model { context: String, err: ModelError },
    /// A check ran to completion and came out negative.
    Failed(String),
    /// Fuel or saturation ran out before a verdict.
    Indeterminate(String),
}

impl CliError {
    pub fn io(path: &Path, err: io::Error) -> CliError {
        CliError::Io {
            path: path.to_path_buf(),
            err,
        }
    }

    pub fn format(path: impl fmt::Display, msg: impl Into<String>) -> CliError {
        CliError::Format {
            path: path.to_string(),
            msg: msg.into(),
        }
    }

    pub fn kernel(context: impl fmt::Display, err: KernelError) -> CliError {
        CliError::Kernel {
            context: context.to_string(),
            err,
        }
    }

    pub fn model(context: impl fmt::Display, err: ModelError) -> CliError {
        match err {
            ModelError::Kernel(err) => CliError::kernel(context, err),
            err => CliError::Model {
                context: context.to_string(),
                err,
            },
        }
    }

    /// 1 for domain failures, 2 for usage and IO, 3 for indeterminate
    /// outcomes.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Format { .. } | CliError::Usage(_) => 2,
            CliError::Kernel { err, .. } => match err {
                KernelError::Indeterminate { .. } | KernelError::Budget(_) => 3,
                _ => 1,
            },
            CliError::Model { err, .. } => match err {
                ModelError::SearchSpaceExceeded { .. } | ModelError::NotSaturated => 3,
                _ => 1,
            },
            CliError::Failed(_) => 1,
            CliError::Indeterminate(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io { path, err } => write!(f, "{}: {err}", path.display()),
            CliError::Format { path, msg } => write!(f, "{path}: {msg}"),
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Kernel { context, err } | CliError::Model {
                context,
                err: ModelError::Kernel(err),
            } => write!(f, "{context}: {err}"),
            CliError::Model { context, err } => write!(f, "{context}: {err}"),
            CliError::Failed(m) => f.write_str(m),
            CliError::Indeterminate(m) => write!(f, "indeterminate: {m}"),
        }
    }
}

impl std::error::Error for CliError {}
