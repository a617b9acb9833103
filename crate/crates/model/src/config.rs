use serde::{Deserialize, Serialize};

use crate::{ModelError, Result};

/// Network hyperparameters. `desk()` is small enough to train in minutes on
/// one CPU core while keeping every architectural mechanism; `paper_scale()`
/// selects the full-size dimensions (256x256, 64-dim styles).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetConfig {
    pub image_size: usize,
    pub image_channels: usize,
    /// Channel width after the stride-2 stem convolution.
    pub stem_channels: usize,
    /// Output channels of each adaptive residual stage (one per
    /// downsampling stage after the stem).
    pub stage_channels: Vec<usize>,
    pub latent_channels: usize,
    pub style_dim: usize,
    pub style_seed_dim: usize,
    pub domains: usize,
    pub mapping_hidden: usize,
    pub hyper_channels: usize,
    pub leaky_slope: f64,
    pub norm_eps: f64,
    pub sigma_min: f64,
    pub prob_floor: f64,
    pub sigma_grid_levels: usize,
    /// Symbols outside [-bound, bound] are escape-coded.
    pub latent_symbol_bound: i32,
    pub hyper_symbol_bound: i32,
    /// Hidden width of the factorized prior's monotone stack.
    pub prior_hidden: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl NetConfig {
    pub fn desk() -> Self {
        NetConfig {
            image_size: 64,
            image_channels: 3,
            stem_channels: 10,
            stage_channels: vec![12, 18, 24, 32],
            latent_channels: 8,
            style_dim: 16,
            style_seed_dim: 8,
            domains: 2,
            mapping_hidden: 48,
            hyper_channels: 8,
            leaky_slope: 0.2,
            norm_eps: 1e-5,
            sigma_min: 0.11,
            prob_floor: 1e-9,
            sigma_grid_levels: 64,
            latent_symbol_bound: 64,
            hyper_symbol_bound: 64,
            prior_hidden: 3,
        }
    }

    pub fn paper_scale() -> Self {
        NetConfig {
            image_size: 256,
            stem_channels: 32,
            stage_channels: vec![64, 128, 256, 256],
            latent_channels: 16,
            style_dim: 64,
            style_seed_dim: 16,
            mapping_hidden: 256,
            hyper_channels: 32,
            ..Self::desk()
        }
    }

    /// Total downsampling factor from image to latent. The stride-2 stem is
    /// the first downsampling stage; each stage but the last pools by 2.
    pub fn downsample_factor(&self) -> usize {
        1 << self.stage_channels.len()
    }

    pub fn latent_size(&self) -> usize {
        self.image_size / self.downsample_factor()
    }

    pub fn hyper_size(&self) -> usize {
        (self.latent_size() / 4).max(1)
    }

    pub fn latent_elements(&self) -> usize {
        self.latent_channels * self.latent_size() * self.latent_size()
    }

    pub fn hyper_elements(&self) -> usize {
        self.hyper_channels * self.hyper_size() * self.hyper_size()
    }

    pub fn pixels(&self) -> usize {
        self.image_size * self.image_size
    }

    pub fn validate(&self) -> Result<()> {
        if self.domains < 2 {
            return Err(ModelError::Config(format!(
                "at least two domains required, got {}",
                self.domains
            )));
        }
        if self.stage_channels.is_empty() {
            return Err(ModelError::Config("no residual stages configured".into()));
        }
        if self.image_size % self.downsample_factor() != 0 || self.latent_size() < 4 {
            return Err(ModelError::Config(format!(
                "image size {} incompatible with {} downsampling stages",
                self.image_size,
                self.stage_channels.len() + 1
            )));
        }
        if self.latent_size() % 4 != 0 {
            return Err(ModelError::Config(format!(
                "latent extent {} must be divisible by 4 for the hyper path",
                self.latent_size()
            )));
        }
        if self.sigma_min <= 0.0 || self.prob_floor <= 0.0 {
            return Err(ModelError::Config(
                "sigma_min and prob_floor must be positive".into(),
            ));
        }
        if self.sigma_grid_levels < 2 {
            return Err(ModelError::Config("need at least 2 sigma grid levels".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: NetConfig =
            toml::from_str(text).map_err(|e| ModelError::Config(format!("net config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("net config serializes")
    }
}
