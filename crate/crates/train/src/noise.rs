//! Pre-drawn per-iteration randomness. Drawing everything up front makes
//! each loss a deterministic function of (parameters, batch, noise), which
//! is what the finite-difference checks, the resume-exactness guarantee,
//! and the seeded-run determinism tests rely on.

use autodiff::{NArray, Real, SeedStream};
use model::NetConfig;

pub struct TranslationNoise<T> {
    /// Random target domain per sample.
    pub target_labels: Vec<usize>,
    /// Two independent style seeds per sample (diversity pair).
    pub w1: NArray<T>,
    pub w2: NArray<T>,
    pub quant_z: NArray<T>,
    pub quant_h: NArray<T>,
}

pub struct AutoencodeNoise<T> {
    pub quant_z: NArray<T>,
    pub quant_h: NArray<T>,
}

fn quant_noise<T: Real>(rng: &mut SeedStream, shape: &[usize]) -> NArray<T> {
    rng.uniform_array(shape, -0.5, 0.5)
}

pub fn draw_translation_noise<T: Real>(
    rng: &mut SeedStream,
    cfg: &NetConfig,
    batch: usize,
) -> TranslationNoise<T> {
    let target_labels = (0..batch).map(|_| rng.uniform_usize(cfg.domains)).collect();
    let w1 = rng.normal_array(&[batch, cfg.style_seed_dim], 1.0);
    let w2 = rng.normal_array(&[batch, cfg.style_seed_dim], 1.0);
    let ls = cfg.latent_size();
    let hs = cfg.hyper_size();
    TranslationNoise {
        target_labels,
        w1,
        w2,
        quant_z: quant_noise(rng, &[batch, cfg.latent_channels, ls, ls]),
        quant_h: quant_noise(rng, &[batch, cfg.hyper_channels, hs, hs]),
    }
}

pub fn draw_autoencode_noise<T: Real>(
    rng: &mut SeedStream,
    cfg: &NetConfig,
    batch: usize,
) -> AutoencodeNoise<T> {
    let ls = cfg.latent_size();
    let hs = cfg.hyper_size();
    AutoencodeNoise {
        quant_z: quant_noise(rng, &[batch, cfg.latent_channels, ls, ls]),
        quant_h: quant_noise(rng, &[batch, cfg.hyper_channels, hs, hs]),
    }
}
