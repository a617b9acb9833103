use serde::{Deserialize, Serialize};

use crate::{Result, TrainError};

/// Which training procedure to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Translation objective only, from scratch.
    I2iCodec,
    /// Distortion-only autoencoding pretrain, then joint training of both
    /// branches every iteration.
    Ui2iCodec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub seed: u64,
    pub batch_size: usize,
    /// Rate weight of the translation objective.
    pub lambda_translate: f64,
    /// Rate weight of the autoencoding objective; larger values press the
    /// rate harder and land at lower bitrates.
    pub lambda_autoencode: f64,
    /// Weight of the adversarial term in the autoencoding objective.
    pub beta_adv_autoencode: f64,
    pub gamma_style: f64,
    pub gamma_diversity: f64,
    pub gamma_cycle: f64,
    /// Linearly decay the diversity weight to zero over the joint phase.
    pub anneal_diversity: bool,
    pub pretrain_iters: u64,
    pub joint_iters: u64,
    pub learning_rate: f64,
    pub learning_rate_mapping: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub r1_weight: f64,
    /// Emit a checkpoint every N joint iterations (0 = final only).
    pub checkpoint_every: u64,
    /// Branch switches; disabling one reduces the unified step to the other
    /// branch's trainer.
    pub enable_translation: bool,
    pub enable_autoencoding: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            batch_size: 8,
            lambda_translate: 0.1,
            lambda_autoencode: 5.0,
            beta_adv_autoencode: 1.0,
            gamma_style: 1.0,
            gamma_diversity: 1.0,
            gamma_cycle: 1.0,
            anneal_diversity: true,
            pretrain_iters: 2_500,
            joint_iters: 5_000,
            learning_rate: 1e-4,
            learning_rate_mapping: 5e-5,
            adam_beta1: 0.0,
            adam_beta2: 0.99,
            adam_eps: 1e-8,
            r1_weight: 1.0,
            checkpoint_every: 0,
            enable_translation: true,
            enable_autoencoding: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("lambda_translate", self.lambda_translate),
            ("lambda_autoencode", self.lambda_autoencode),
            ("beta_adv_autoencode", self.beta_adv_autoencode),
            ("gamma_style", self.gamma_style),
            ("gamma_diversity", self.gamma_diversity),
            ("gamma_cycle", self.gamma_cycle),
            ("r1_weight", self.r1_weight),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) {
                return Err(TrainError::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.learning_rate_mapping > 0.0) {
            return Err(TrainError::Config("learning rates must be positive".into()));
        }
        if !self.enable_translation && !self.enable_autoencoding {
            return Err(TrainError::Config("both branches disabled".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TrainConfig =
            toml::from_str(text).map_err(|e| TrainError::Config(format!("train config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("train config serializes")
    }

    /// Effective diversity weight at a joint iteration.
    pub fn gamma_diversity_at(&self, joint_iter: u64) -> f64 {
        if !self.anneal_diversity || self.joint_iters == 0 {
            return self.gamma_diversity;
        }
        let t = (joint_iter as f64 / self.joint_iters as f64).min(1.0);
        self.gamma_diversity * (1.0 - t)
    }
}
