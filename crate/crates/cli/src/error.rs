use std::io;

use eseds_core::error::Error as CoreError;
use eseds_core::transport::ErrorCode;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Inapplicable(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("report output: {0}")]
    Csv(#[from] csv::Error),
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Core(CoreError::Io(e))
    }
}

impl CliError {
    /// 1 for anything the caller can fix, 2 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Inapplicable(_) => 1,
            CliError::Csv(_) => 2,
            CliError::Core(e) => match e {
                CoreError::Io(io) if io.kind() == io::ErrorKind::NotFound => 1,
                CoreError::Io(io) if io.kind() == io::ErrorKind::ConnectionRefused => 1,
                CoreError::Io(_)
                | CoreError::Protocol(_)
                | CoreError::Server {
                    code: ErrorCode::Internal | ErrorCode::Io,
                    ..
                } => 2,
                _ => 1,
            },
        }
    }

    /// Short stable name for the machine-readable error line.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Inapplicable(_) => "inapplicable",
            CliError::Csv(_) => "output",
            CliError::Core(e) => match e {
                CoreError::UnsupportedSecurityParam(_) => "security-param",
                CoreError::OutOfDomain { .. } => "out-of-domain",
                CoreError::Authentication => "authentication",
                CoreError::MalformedCiphertext { .. } => "malformed-ciphertext",
                CoreError::EmptyRange => "empty-range",
                CoreError::IndexOutOfRange { .. } => "index-out-of-range",
                CoreError::EmptyStore => "empty-store",
                CoreError::WrongMode { .. } => "wrong-mode",
                CoreError::Collision => "collision",
                CoreError::IndexSpaceExhausted => "index-space-exhausted",
                CoreError::TooFewCells { .. } => "too-few-cells",
                CoreError::TotalMismatch { .. } => "total-mismatch",
                CoreError::SizeMismatch { .. } => "size-mismatch",
                CoreError::NotDense { .. } => "not-dense",
                CoreError::InvalidArgument(_) => "invalid-argument",
                CoreError::Format(_) => "format",
                CoreError::Protocol(_) => "protocol",
                CoreError::Server { .. } => "server",
                CoreError::Io(_) => "io",
            },
        }
    }

    /// `error kind=<kind> code=<exit> msg=<message on one line>`
    pub fn line(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("error kind={} code={} msg={}", self.kind(), self.exit_code(), msg)
    }
}
