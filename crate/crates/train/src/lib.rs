//! Training: the translation objective (adversarial, style reconstruction,
//! diversity, cycle consistency, rate), the autoencoding objective
//! (rate-distortion plus adversarial), the per-iteration mode switch that
//! runs both branches, and the two schedules (translation-only, and
//! distortion-pretrain followed by joint training).

pub mod config;
pub mod losses;
pub mod noise;
pub mod report;
pub mod trainer;

pub use config::{Schedule, TrainConfig};
pub use report::{LossReport, ReportMode};
pub use trainer::{TrainSet, Trainer};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Autodiff(#[from] autodiff::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TrainError>;
