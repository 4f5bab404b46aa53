// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

/// Errors raised by detectors, harness routines and the CLI front end.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FocusError {
    #[error("non-finite observation: {value}")]
    NonFiniteInput { value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("observation buffer exceeded its cap of {cap} entries; oldest entries were dropped")]
    BufferCapExceeded { cap: usize },

    #[error("target average run length {target} is unreachable with horizon {horizon}")]
    UnreachableTarget { target: f64, horizon: u64 },

    #[error("zero variance in probation sample")]
    ZeroVariance,

    #[error("line {line}: cannot parse {text:?} as a number")]
    Parse { line: u64, text: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl FocusError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        FocusError::InvalidConfig(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        FocusError::InvalidInput(msg.into())
    }
}

impl From<std::io::Error> for FocusError {
    fn from(err: std::io::Error) -> Self {
        FocusError::Io(err.to_string())
    }
}

pub(crate) fn ensure_finite(value: f64) -> Result<f64, FocusError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(FocusError::NonFiniteInput { value })
    }
}
