use std::io;

use crate::transport::ErrorCode;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unsupported security parameter: {0} bits (expected 128 or 256)")]
    UnsupportedSecurityParam(u32),

    #[error("plaintext {value} outside domain 0..{size}")]
    OutOfDomain { value: u64, size: u64 },

    #[error("ciphertext failed authentication")]
    Authentication,

    #[error("malformed ciphertext: expected {expected} bytes, got {actual}")]
    MalformedCiphertext { expected: usize, actual: usize },

    #[error("range must contain at least one element")]
    EmptyRange,

    #[error("index {index} out of range for {len} cells")]
    IndexOutOfRange { index: u64, len: u64 },

    #[error("store is empty")]
    EmptyStore,

    #[error("operation requires a {expected} store")]
    WrongMode { expected: &'static str },

    #[error("no free sparse index between neighbours")]
    Collision,

    #[error("sparse index space exhausted")]
    IndexSpaceExhausted,

    #[error("k = {k} exceeds store size {len}")]
    TooFewCells { k: usize, len: usize },

    #[error("histogram totals differ ({left} vs {right})")]
    TotalMismatch { left: u64, right: u64 },

    #[error("sizes differ ({left} vs {right})")]
    SizeMismatch { left: usize, right: usize },

    #[error("ciphertext classes are not dense ({classes} classes for domain of {domain})")]
    NotDense { classes: usize, domain: u64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("server error ({code:?}): {message}")]
    Server { code: ErrorCode, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}
