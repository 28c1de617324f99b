//! File formats: traces, topologies, model specs, device maps, and metric
//! records. Loaders validate through the core constructors and report the
//! offending line where the format is line-delimited.

pub mod device_map;
pub mod metrics;
pub mod model;
pub mod topology;
pub mod trace;

use std::path::Path;

use thiserror::Error;

/// Categorized I/O-layer errors: i/o, parse, and validation are distinct.
#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path}{}: {message}", fmt_line(.line))]
    Parse {
        path: String,
        line: Option<usize>,
        message: String,
    },

    #[error("validation error at {path}{}: {source}", fmt_line(.line))]
    Validation {
        path: String,
        line: Option<usize>,
        #[source]
        source: servesim_core::Error,
    },
}

fn fmt_line(line: &Option<usize>) -> String {
    match line {
        Some(n) => format!(":{n}"),
        None => String::new(),
    }
}

impl IoError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io { path: path.display().to_string(), source }
    }

    pub(crate) fn parse(path: &Path, line: Option<usize>, message: impl Into<String>) -> Self {
        IoError::Parse {
            path: path.display().to_string(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn validation(path: &Path, line: Option<usize>, source: servesim_core::Error) -> Self {
        IoError::Validation {
            path: path.display().to_string(),
            line,
            source,
        }
    }
}
