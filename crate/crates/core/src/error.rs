use alloc::string::String;

/// Errors produced by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got} ({what})")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("series too short: need at least {needed} hourly values, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("min-max scaler applied before fit")]
    NotFitted,
    #[error("cannot split {cells} cells across {clients} clients by cell")]
    TooManyClients { clients: usize, cells: usize },
    #[error("unknown client {0}")]
    UnknownClient(usize),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
