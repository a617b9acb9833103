//! Rate-distortion sweeps over trained checkpoints: every test image goes
//! through the real coder and container, gets decoded, and is scored with
//! all metrics. Bits per pixel always comes from actual container bytes,
//! never from the training estimate.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use autodiff::NArray;
use model::pipeline::{self, EncodeOptions, StyleBehavior};
use model::types::Mode;
use serde::{Deserialize, Serialize};
use train::Trainer;

use crate::classifier::ReferenceClassifier;
use crate::dataset::{DatasetSpec, LabeledSet};
use crate::metrics;
use crate::plot::{render_plot, Series};
use crate::{EvalError, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalConfig {
    pub dataset: DatasetSpec,
    /// Checkpoints to sweep; their lambda weights are read from the
    /// trainer state embedded in each checkpoint.
    pub checkpoints: Vec<String>,
    /// Style samples per input for the diversity score.
    pub styles_per_input: usize,
    pub out_dir: String,
}

impl EvalConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: EvalConfig =
            toml::from_str(text).map_err(|e| EvalError::Config(format!("eval config: {e}")))?;
        if cfg.checkpoints.is_empty() {
            return Err(EvalError::Config("no checkpoints to evaluate".into()));
        }
        if cfg.styles_per_input < 2 {
            return Err(EvalError::Config("styles_per_input must be >= 2".into()));
        }
        Ok(cfg)
    }
}

/// One row of the sweep: one image through one checkpoint in one mode.
#[derive(Clone, Debug)]
pub struct RdRow {
    pub checkpoint: String,
    pub mode: Mode,
    pub lambda_t: f64,
    pub lambda_a: f64,
    pub image_index: usize,
    pub bpp: f64,
    pub estimate_bpp: f64,
    pub psnr: f64,
    pub msssim: f64,
    pub diversity: f64,
    /// 1.0 when the decoded image classifies into its target domain
    /// (source domain for autoencoding).
    pub domain_score: f64,
}

pub const RD_CSV_HEADER: &str =
    "checkpoint,mode,lambda_t,lambda_a,image_index,bpp,estimate_bpp,psnr,msssim,diversity,domain_score";

impl RdRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.checkpoint,
            self.mode.tag(),
            self.lambda_t,
            self.lambda_a,
            self.image_index,
            self.bpp,
            self.estimate_bpp,
            self.psnr,
            self.msssim,
            self.diversity,
            self.domain_score
        )
    }
}

/// Aggregate of one (checkpoint, mode) sweep.
#[derive(Clone, Debug)]
pub struct SweepSummary {
    pub checkpoint: String,
    pub mode: Mode,
    pub lambda_t: f64,
    pub lambda_a: f64,
    pub mean_bpp: f64,
    pub mean_estimate_bpp: f64,
    pub mean_psnr: f64,
    pub mean_msssim: f64,
    pub mean_diversity: f64,
    pub domain_score: f64,
    /// Mean relative gap |actual - estimate| / actual of container bits.
    pub mean_estimate_gap: f64,
}

pub struct SweepOutput {
    pub rows: Vec<RdRow>,
    pub summaries: Vec<SweepSummary>,
    pub csv_path: PathBuf,
    pub plot_paths: Vec<PathBuf>,
}

fn style_seed_for(image_index: usize, sample: usize) -> u64 {
    0x5741_0000 + (image_index as u64) * 64 + sample as u64
}

/// Evaluate one checkpoint in both modes over a test set.
#[allow(clippy::too_many_arguments)]
fn sweep_checkpoint(
    label: &str,
    trainer: &Trainer,
    test: &LabeledSet,
    classifier: &ReferenceClassifier,
    styles_per_input: usize,
    rows: &mut Vec<RdRow>,
) -> Result<()> {
    let cfg = &trainer.net_cfg;
    let params = &trainer.params;
    let lambda_t = trainer.train_cfg.lambda_translate;
    let lambda_a = trainer.train_cfg.lambda_autoencode;
    let pixels = (cfg.image_size * cfg.image_size) as f64;

    for (i, (img, &label_src)) in test.images.iter().zip(test.labels.iter()).enumerate() {
        // Autoencoding: reconstruct and score against the input.
        let res = pipeline::encode_image(
            cfg,
            params,
            img,
            &EncodeOptions {
                mode: Mode::Autoencode,
                target_domain: 0,
                style: StyleBehavior::None,
            },
        )?;
        let (recon, _) = pipeline::decode_container(cfg, params, &res.bytes, None)?;
        // The style-invariance floor: decoding "with different styles" in
        // autoencoding mode must produce bit-identical images.
        let again = pipeline::decode_container(cfg, params, &res.bytes, None)?.0;
        let a_diversity = metrics::diversity_score(&[recon.clone(), again])?;
        let a_domain = classifier.domain_score(&[recon.clone()], &[label_src])?;
        rows.push(RdRow {
            checkpoint: label.to_string(),
            mode: Mode::Autoencode,
            lambda_t,
            lambda_a,
            image_index: i,
            bpp: res.bpp,
            estimate_bpp: res.estimated_container_bits / pixels,
            psnr: metrics::psnr(img, &recon)?,
            msssim: metrics::msssim(img, &recon)?,
            diversity: a_diversity,
            domain_score: a_domain,
        });

        // Translation into the other domain, sender-side latent style.
        let target = (label_src + 1) % cfg.domains;
        let style = pipeline::style_from_seed(cfg, params, style_seed_for(i, 0), target)?;
        let res = pipeline::encode_image(
            cfg,
            params,
            img,
            &EncodeOptions {
                mode: Mode::Translate,
                target_domain: target,
                style: StyleBehavior::SenderSide(style),
            },
        )?;
        let (translated, _) = pipeline::decode_container(cfg, params, &res.bytes, None)?;

        // Diversity over receiver-side styles of the same content.
        let content = pipeline::encode_image(
            cfg,
            params,
            img,
            &EncodeOptions {
                mode: Mode::Translate,
                target_domain: target,
                style: StyleBehavior::ReceiverSide,
            },
        )?;
        let mut variants = Vec::with_capacity(styles_per_input);
        for s in 0..styles_per_input {
            let style = pipeline::style_from_seed(cfg, params, style_seed_for(i, s), target)?;
            variants.push(
                pipeline::decode_container(cfg, params, &content.bytes, Some(&style))?.0,
            );
        }
        let t_diversity = metrics::diversity_score(&variants)?;
        let t_domain = classifier.domain_score(&[translated.clone()], &[target])?;
        rows.push(RdRow {
            checkpoint: label.to_string(),
            mode: Mode::Translate,
            lambda_t,
            lambda_a,
            image_index: i,
            bpp: res.bpp,
            estimate_bpp: res.estimated_container_bits / pixels,
            psnr: metrics::psnr(img, &translated)?,
            msssim: metrics::msssim(img, &translated)?,
            diversity: t_diversity,
            domain_score: t_domain,
        });
    }
    Ok(())
}

fn summarize(rows: &[RdRow]) -> Vec<SweepSummary> {
    let mut keys: Vec<(String, Mode)> = Vec::new();
    for r in rows {
        let key = (r.checkpoint.clone(), r.mode);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.iter()
        .map(|(ckpt, mode)| {
            let group: Vec<&RdRow> = rows
                .iter()
                .filter(|r| &r.checkpoint == ckpt && r.mode == *mode)
                .collect();
            let n = group.len() as f64;
            let mean = |f: &dyn Fn(&RdRow) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / n;
            SweepSummary {
                checkpoint: ckpt.clone(),
                mode: *mode,
                lambda_t: group[0].lambda_t,
                lambda_a: group[0].lambda_a,
                mean_bpp: mean(&|r| r.bpp),
                mean_estimate_bpp: mean(&|r| r.estimate_bpp),
                mean_psnr: mean(&|r| r.psnr),
                mean_msssim: mean(&|r| r.msssim),
                mean_diversity: mean(&|r| r.diversity),
                domain_score: mean(&|r| r.domain_score),
                mean_estimate_gap: mean(&|r| (r.bpp - r.estimate_bpp).abs() / r.bpp),
            }
        })
        .collect()
}

/// Sweep all checkpoints over the test set; write the per-image CSV and the
/// summary curves.
pub fn rd_sweep(
    checkpoints: &[PathBuf],
    test: &LabeledSet,
    classifier: &ReferenceClassifier,
    styles_per_input: usize,
    out_dir: &Path,
) -> Result<SweepOutput> {
    if checkpoints.is_empty() {
        return Err(EvalError::Config("no checkpoints to sweep".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut rows = Vec::new();
    for path in checkpoints {
        if !path.exists() {
            return Err(EvalError::Config(format!(
                "missing checkpoint {}",
                path.display()
            )));
        }
        let trainer = Trainer::from_checkpoint(path)?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| path.display().to_string());
        sweep_checkpoint(&label, &trainer, test, classifier, styles_per_input, &mut rows)?;
    }

    let csv_path = out_dir.join("rd_points.csv");
    let mut text = String::from(RD_CSV_HEADER);
    text.push('\n');
    for r in &rows {
        writeln!(text, "{}", r.csv_row()).expect("write to string");
    }
    std::fs::write(&csv_path, text)?;

    let summaries = summarize(&rows);
    let mut plot_paths = Vec::new();
    for (metric, name) in [
        (&|s: &SweepSummary| s.mean_psnr as f64 as f64, "rd_psnr"),
        (&|s: &SweepSummary| s.mean_msssim, "rd_msssim") as (&dyn Fn(&SweepSummary) -> f64, &str),
    ] {
        let mut series = Vec::new();
        for (mode, color) in [(Mode::Autoencode, [0.85, 0.3, 0.2]), (Mode::Translate, [0.2, 0.35, 0.8])]
        {
            let pts: Vec<(f64, f64)> = summaries
                .iter()
                .filter(|s| s.mode == mode)
                .map(|s| (s.mean_bpp, metric(s)))
                .collect();
            if !pts.is_empty() {
                series.push(Series { points: pts, color });
            }
        }
        let path = out_dir.join(format!("{name}.png"));
        render_plot(&path, &series)?;
        plot_paths.push(path);
    }

    Ok(SweepOutput {
        rows,
        summaries,
        csv_path,
        plot_paths,
    })
}

/// Convenience accessor used by reporting code.
pub fn summary_for<'a>(
    out: &'a SweepOutput,
    checkpoint: &str,
    mode: Mode,
) -> Option<&'a SweepSummary> {
    out.summaries
        .iter()
        .find(|s| s.checkpoint == checkpoint && s.mode == mode)
}

/// Test-image sanity: the whole-container bpp of a given byte length.
pub fn container_bpp(bytes: usize, image_size: usize) -> f64 {
    coder::Container::bpp_of_len(bytes, image_size, image_size)
}
