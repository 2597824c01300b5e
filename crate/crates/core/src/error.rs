// SPDX-License-Identifier: MIT OR Apache-2.0

//! Error type shared by every analysis module.

use thiserror::Error;

/// Reasons a weight file can be rejected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoadError {
    #[error("bad magic prefix (expected \"CHSCOPE1\")")]
    BadMagic,
    #[error("corrupt manifest: {0}")]
    CorruptHeader(String),
    #[error("tensor {name}: manifest shape {found:?} does not match expected {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("payload truncated: need {needed} bytes, file has {available}")]
    Truncated { needed: usize, available: usize },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite value at element {index}")]
    NonFinite { index: usize },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("degenerate target: projection onto a zero vector")]
    DegenerateTarget,

    #[error("fit error: {0}")]
    Fit(String),

    #[error("orbit diverged at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("token id {id} out of range for vocab {vocab}")]
    Token { id: u32, vocab: usize },

    #[error("sequence length {needed} exceeds max_seq {max_seq}")]
    Capacity { needed: usize, max_seq: usize },

    #[error("numeric overflow: non-finite state produced by layer {layer}")]
    NumericOverflow { layer: usize },

    #[error("index out of range: {0}")]
    Index(String),

    #[error("degenerate input: token {token} has a zero-norm initial state")]
    DegenerateInput { token: usize },

    #[error("undefined perturbation: realized perturbation norm is zero")]
    UndefinedPerturbation,

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("weight file: {0}")]
    Load(#[from] LoadError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    /// True for failures caused by the arithmetic itself (overflow, divergence)
    /// rather than by bad inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NumericOverflow { .. } | Error::Divergence { .. } | Error::NonFinite { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
