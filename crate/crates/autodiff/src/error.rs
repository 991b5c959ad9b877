use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("loss node must be a 1x1 scalar, got {0:?}")]
    NonScalarLoss((usize, usize)),

    #[error("non-finite value produced by {op} at {context}")]
    NonFinite { op: &'static str, context: String },

    #[error("tensor data length {len} does not match shape {rows}x{cols}")]
    BadData { rows: usize, cols: usize, len: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
