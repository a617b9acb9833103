//! The unified codec model: one parameter set that either reconstructs its
//! input (autoencoding mode) or emits a style-controlled translation into a
//! target domain (translation mode), with the content latent quantized and
//! range-coded into a real bitstream.
//!
//! Mode switching is implemented by adaptation units inside the residual
//! blocks of the content encoder and decoder: per-channel scale/shift pairs
//! computed as linear functions of the mode one-hot (and of the style vector
//! in the decoder). All convolution and dense weights are shared between
//! modes; only the factorized priors of the entropy model are mode-split.

pub mod checkpoint;
pub mod config;
pub mod entropy;
pub mod init;
pub mod net;
pub mod networks;
pub mod pipeline;
pub mod types;

pub use config::NetConfig;
pub use net::NetCtx;
pub use types::{DomainLabel, LatentCode, Mode, QuantPhase, StyleOrigin, StyleVector};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Autodiff(#[from] autodiff::Error),
    #[error(transparent)]
    Coder(#[from] coder::CoderError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;
