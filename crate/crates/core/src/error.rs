use thiserror::Error;

/// Failure to parse bytes in the canonical encoding.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("input truncated")]
    Truncated,
    #[error("{0} trailing bytes after value")]
    TrailingBytes(usize),
    #[error("string field is not valid utf-8")]
    InvalidUtf8,
    #[error("unknown tag byte {0:#04x}")]
    UnknownTag(u8),
    #[error("bad file magic or version")]
    BadMagic,
    #[error("dangling reference: {0}")]
    Dangling(String),
}

#[derive(Debug, Error)]
pub enum StoreFileError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}
