//! Evaluation: the synthetic two-domain dataset (shared content factors,
//! independent style factors, domains differing only in shape family),
//! desk-scale metrics (PSNR, multi-scale SSIM, pairwise-L1 diversity, and a
//! reference-classifier domain score standing in for perceptual-network
//! metrics), and rate-distortion sweeps over trained checkpoints with real
//! bitstreams.

pub mod classifier;
pub mod dataset;
pub mod imageio;
pub mod metrics;
pub mod plot;
pub mod sweep;

pub use classifier::ReferenceClassifier;
pub use dataset::{DatasetSpec, LabeledSet, SampleParams};
pub use sweep::{rd_sweep, EvalConfig, RdRow};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Train(#[from] train::TrainError),
    #[error(transparent)]
    Autodiff(#[from] autodiff::Error),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("image error: {0}")]
    Image(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EvalError>;
