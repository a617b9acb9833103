//! Bit-exact entropy coding and the wire container.
//!
//! The coder is a 32-bit integer range coder with 16-bit frequency precision
//! and carry-less renormalization: the working interval never wraps the
//! 32-bit boundary, so no carry propagation into already-emitted bytes can
//! occur. Identical update and renormalization code runs on both sides,
//! which is what keeps encoder and decoder synchronized.
//!
//! The container layout is documented in `FORMAT.md` at the workspace root
//! and is versioned; any single-byte corruption is caught by the trailing
//! CRC-32 with overwhelming probability.

mod cdf;
mod container;
mod crc;
mod rc;

pub use cdf::{CdfTable, PROB_BITS, PROB_TOTAL};
pub use container::{pack, unpack, Container, ContainerHeader, CONTAINER_MAGIC, CONTAINER_VERSION};
pub use crc::crc32;
pub use rc::{rc_decode, rc_encode, RangeDecoder, RangeEncoder};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoderError {
    #[error("encoding error: {0}")]
    Encode(String),
    #[error("decode error: {0}")]
    Decode(String),
    #[error("container error at byte {position}: {message}")]
    Container { position: usize, message: String },
    #[error("invalid cdf table: {0}")]
    BadTable(String),
}

pub type Result<T> = std::result::Result<T, CoderError>;
