//! The training driver: batch sampling, the per-iteration mode switch that
//! executes both branches (each followed by its own discriminator update),
//! the two schedules, checkpointing with full RNG state, and exact resume.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use autodiff::{adam_step, NArray, ParamTree, SeedStream};
use model::checkpoint;
use model::init::init_params;
use model::types::Mode;
use model::NetConfig;

use crate::config::{Schedule, TrainConfig};
use crate::losses::{
    loss_autoencoding, loss_discriminator, loss_translation, Batch, TranslationWeights,
};
use crate::noise::{draw_autoencode_noise, draw_translation_noise};
use crate::report::{LossCsv, LossReport, ReportMode};
use crate::{Result, TrainError};

/// In-memory training corpus: one image `[c, h, w]` in [0, 1] per entry.
pub struct TrainSet {
    pub images: Vec<NArray<f32>>,
    pub labels: Vec<usize>,
}

impl TrainSet {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    fn validate(&self, cfg: &NetConfig) -> Result<()> {
        if self.images.is_empty() || self.images.len() != self.labels.len() {
            return Err(TrainError::Config(format!(
                "dataset has {} images and {} labels",
                self.images.len(),
                self.labels.len()
            )));
        }
        let want = [cfg.image_channels, cfg.image_size, cfg.image_size];
        for (i, img) in self.images.iter().enumerate() {
            if img.shape() != want {
                return Err(TrainError::Config(format!(
                    "image {i} has shape {:?}, expected {:?}",
                    img.shape(),
                    want
                )));
            }
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= cfg.domains) {
            return Err(TrainError::Config(format!(
                "label {bad} out of range 0..{}",
                cfg.domains
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Pretrain,
    Joint,
}

pub struct TrainOutcome {
    pub final_checkpoint: PathBuf,
    pub checkpoints: Vec<PathBuf>,
}

pub struct Trainer {
    pub net_cfg: NetConfig,
    pub train_cfg: TrainConfig,
    pub schedule: Schedule,
    pub params: ParamTree<f32>,
    rng: SeedStream,
    phase: Phase,
    pretrain_done: u64,
    joint_done: u64,
}

const META_VERSION: u8 = 1;

impl Trainer {
    pub fn new(net_cfg: NetConfig, train_cfg: TrainConfig, schedule: Schedule) -> Result<Self> {
        net_cfg.validate()?;
        train_cfg.validate()?;
        let mut master = SeedStream::new(train_cfg.seed);
        let init_seed = master.next_u64();
        let params = init_params::<f32>(&net_cfg, init_seed)?;
        let rng = master.fork();
        let phase = match schedule {
            Schedule::I2iCodec => Phase::Joint,
            Schedule::Ui2iCodec => Phase::Pretrain,
        };
        Ok(Trainer {
            net_cfg,
            train_cfg,
            schedule,
            params,
            rng,
            phase,
            pretrain_done: 0,
            joint_done: 0,
        })
    }

    /// Global step index (pretrain steps then joint steps).
    pub fn iteration(&self) -> u64 {
        self.pretrain_done + self.joint_done
    }

    fn pretrain_target(&self) -> u64 {
        match self.schedule {
            Schedule::I2iCodec => 0,
            Schedule::Ui2iCodec => self.train_cfg.pretrain_iters,
        }
    }

    fn branch_switches(&self) -> (bool, bool) {
        match self.schedule {
            // The translation-only trainer is the unified step with the
            // autoencoding branch switched off.
            Schedule::I2iCodec => (false, true),
            Schedule::Ui2iCodec => (
                self.train_cfg.enable_autoencoding,
                self.train_cfg.enable_translation,
            ),
        }
    }

    fn trainer_meta(&self) -> Vec<u8> {
        let cfg = self.train_cfg.to_toml().into_bytes();
        let mut out = Vec::with_capacity(80 + cfg.len());
        out.push(META_VERSION);
        out.push(match self.schedule {
            Schedule::I2iCodec => 0,
            Schedule::Ui2iCodec => 1,
        });
        out.push(match self.phase {
            Phase::Pretrain => 0,
            Phase::Joint => 1,
        });
        out.extend_from_slice(&self.pretrain_done.to_le_bytes());
        out.extend_from_slice(&self.joint_done.to_le_bytes());
        out.extend_from_slice(&self.rng.state().to_bytes());
        out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
        out.extend_from_slice(&cfg);
        out
    }

    /// Restore a trainer from a checkpoint with optimizer and RNG state.
    pub fn from_checkpoint(path: &Path) -> Result<Self> {
        let (net_cfg, params, meta) = checkpoint::load::<f32>(path)?;
        if meta.len() < 3 + 16 + 48 + 4 || meta[0] != META_VERSION {
            return Err(TrainError::Config(
                "checkpoint carries no resumable trainer state".into(),
            ));
        }
        let schedule = match meta[1] {
            0 => Schedule::I2iCodec,
            1 => Schedule::Ui2iCodec,
            other => return Err(TrainError::Config(format!("bad schedule tag {other}"))),
        };
        let phase = match meta[2] {
            0 => Phase::Pretrain,
            1 => Phase::Joint,
            other => return Err(TrainError::Config(format!("bad phase tag {other}"))),
        };
        let mut at = 3;
        let u64_at = |meta: &[u8], at: &mut usize| {
            let mut b = [0u8; 8];
            b.copy_from_slice(&meta[*at..*at + 8]);
            *at += 8;
            u64::from_le_bytes(b)
        };
        let pretrain_done = u64_at(&meta, &mut at);
        let joint_done = u64_at(&meta, &mut at);
        let mut rng_bytes = [0u8; 48];
        rng_bytes.copy_from_slice(&meta[at..at + 48]);
        at += 48;
        let rng = SeedStream::restore(&autodiff::RngState::from_bytes(&rng_bytes));
        let mut len_b = [0u8; 4];
        len_b.copy_from_slice(&meta[at..at + 4]);
        at += 4;
        let cfg_len = u32::from_le_bytes(len_b) as usize;
        let cfg_text = std::str::from_utf8(&meta[at..at + cfg_len])
            .map_err(|_| TrainError::Config("train config in checkpoint is not UTF-8".into()))?;
        let train_cfg = TrainConfig::from_toml(cfg_text)?;
        Ok(Trainer {
            net_cfg,
            train_cfg,
            schedule,
            params,
            rng,
            phase,
            pretrain_done,
            joint_done,
        })
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        checkpoint::save(path, &self.net_cfg, &self.params, &self.trainer_meta(), true)?;
        Ok(())
    }

    fn sample_batch(&mut self, data: &TrainSet) -> Batch<f32> {
        let cfg = &self.net_cfg;
        let n = self.train_cfg.batch_size;
        let mut images = NArray::zeros(&[n, cfg.image_channels, cfg.image_size, cfg.image_size]);
        let mut labels = Vec::with_capacity(n);
        let stride = cfg.image_channels * cfg.image_size * cfg.image_size;
        for row in 0..n {
            let pick = self.rng.uniform_usize(data.len());
            images.data_mut()[row * stride..(row + 1) * stride]
                .copy_from_slice(data.images[pick].data());
            labels.push(data.labels[pick]);
        }
        Batch { images, labels }
    }

    fn apply_generator_grads(
        &mut self,
        grads: &BTreeMap<String, NArray<f32>>,
    ) -> Result<()> {
        let tc = &self.train_cfg;
        let (mapping, rest): (BTreeMap<_, _>, BTreeMap<_, _>) = grads
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .partition(|(k, _)| k.starts_with("map/"));
        adam_step(
            &mut self.params,
            &rest,
            tc.learning_rate,
            tc.adam_beta1,
            tc.adam_beta2,
            tc.adam_eps,
        )?;
        adam_step(
            &mut self.params,
            &mapping,
            tc.learning_rate_mapping,
            tc.adam_beta1,
            tc.adam_beta2,
            tc.adam_eps,
        )?;
        Ok(())
    }

    fn apply_disc_grads(&mut self, grads: &BTreeMap<String, NArray<f32>>) -> Result<()> {
        let tc = &self.train_cfg;
        adam_step(
            &mut self.params,
            grads,
            tc.learning_rate,
            tc.adam_beta1,
            tc.adam_beta2,
            tc.adam_eps,
        )?;
        Ok(())
    }

    fn pretrain_step(&mut self, data: &TrainSet) -> Result<LossReport> {
        let batch = self.sample_batch(data);
        let noise = draw_autoencode_noise(&mut self.rng, &self.net_cfg, batch.labels.len());
        let out = loss_autoencoding(
            &self.params,
            &self.net_cfg,
            &batch,
            &noise,
            0.0,
            0.0,
            false,
            false,
        )?;
        self.apply_generator_grads(&out.gen_grads)?;
        let report = LossReport {
            iteration: self.iteration(),
            mode: ReportMode::Autoencode,
            adv: 0.0,
            sty: 0.0,
            ds: 0.0,
            cyc: 0.0,
            rate_bpp: 0.0,
            rd_distortion: out.rd_distortion,
            adv2: 0.0,
            d_adv: 0.0,
            gamma_ds_eff: 0.0,
            total_t: 0.0,
            total_a: out.total,
        };
        self.pretrain_done += 1;
        Ok(report)
    }

    /// One joint iteration: the autoencoding branch (with its discriminator
    /// update) and then the translation branch (with its own), each on the
    /// batch sampled for this iteration.
    fn joint_step(&mut self, data: &TrainSet) -> Result<Vec<LossReport>> {
        let (do_a, do_t) = self.branch_switches();
        let tc = self.train_cfg.clone();
        let batch = self.sample_batch(data);
        let mut reports = Vec::with_capacity(2);

        if do_a {
            let noise = draw_autoencode_noise(&mut self.rng, &self.net_cfg, batch.labels.len());
            let out = loss_autoencoding(
                &self.params,
                &self.net_cfg,
                &batch,
                &noise,
                tc.lambda_autoencode,
                tc.beta_adv_autoencode,
                true,
                true,
            )?;
            self.apply_generator_grads(&out.gen_grads)?;
            let disc = loss_discriminator(
                &self.params,
                &self.net_cfg,
                &batch.images,
                &batch.labels,
                &out.fake,
                &batch.labels,
                Mode::Autoencode,
                tc.r1_weight,
            )?;
            self.apply_disc_grads(&disc.grads)?;
            reports.push(LossReport {
                iteration: self.iteration(),
                mode: ReportMode::Autoencode,
                adv: 0.0,
                sty: 0.0,
                ds: 0.0,
                cyc: 0.0,
                rate_bpp: out.rate_bpp,
                rd_distortion: out.rd_distortion,
                adv2: out.adv2,
                d_adv: disc.adv,
                gamma_ds_eff: 0.0,
                total_t: 0.0,
                total_a: out.total,
            });
        }

        if do_t {
            let noise = draw_translation_noise(&mut self.rng, &self.net_cfg, batch.labels.len());
            let weights = TranslationWeights {
                gamma_style: tc.gamma_style,
                gamma_diversity: tc.gamma_diversity_at(self.joint_done),
                gamma_cycle: tc.gamma_cycle,
                lambda_rate: tc.lambda_translate,
            };
            let out = loss_translation(&self.params, &self.net_cfg, &batch, &noise, &weights)?;
            self.apply_generator_grads(&out.gen_grads)?;
            let disc = loss_discriminator(
                &self.params,
                &self.net_cfg,
                &batch.images,
                &batch.labels,
                &out.fake,
                &noise.target_labels,
                Mode::Translate,
                tc.r1_weight,
            )?;
            self.apply_disc_grads(&disc.grads)?;
            reports.push(LossReport {
                iteration: self.iteration(),
                mode: ReportMode::Translate,
                adv: out.adv,
                sty: out.sty,
                ds: out.ds,
                cyc: out.cyc,
                rate_bpp: out.rate_bpp,
                rd_distortion: 0.0,
                adv2: 0.0,
                d_adv: disc.adv,
                gamma_ds_eff: weights.gamma_diversity,
                total_t: out.total,
                total_a: 0.0,
            });
        }

        self.joint_done += 1;
        Ok(reports)
    }

    /// Run the schedule to completion, appending to the loss log and writing
    /// checkpoints (every `checkpoint_every` joint iterations, plus a final
    /// one). Resumable: a trainer restored from any emitted checkpoint
    /// continues the exact same trajectory.
    pub fn run(
        &mut self,
        data: &TrainSet,
        out_dir: &Path,
        mut on_report: Option<&mut dyn FnMut(&LossReport)>,
    ) -> Result<TrainOutcome> {
        data.validate(&self.net_cfg)?;
        std::fs::create_dir_all(out_dir)?;
        let csv_path = out_dir.join("loss_log.csv");
        let mut csv = LossCsv::open(&csv_path)?;
        let mut checkpoints = Vec::new();

        while self.phase == Phase::Pretrain && self.pretrain_done < self.pretrain_target() {
            let report = self.pretrain_step(data)?;
            csv.append(&report)?;
            if let Some(cb) = on_report.as_deref_mut() {
                cb(&report);
            }
        }
        if self.phase == Phase::Pretrain {
            self.phase = Phase::Joint;
        }

        while self.joint_done < self.train_cfg.joint_iters {
            let reports = self.joint_step(data)?;
            for report in &reports {
                csv.append(report)?;
                if let Some(cb) = on_report.as_deref_mut() {
                    cb(report);
                }
            }
            let every = self.train_cfg.checkpoint_every;
            if every > 0 && self.joint_done % every == 0 && self.joint_done < self.train_cfg.joint_iters
            {
                let path = out_dir.join(format!("ckpt_{:07}.ckpt", self.iteration()));
                self.save_checkpoint(&path)?;
                checkpoints.push(path);
            }
        }

        let final_path = out_dir.join("final.ckpt");
        self.save_checkpoint(&final_path)?;
        checkpoints.push(final_path.clone());
        Ok(TrainOutcome {
            final_checkpoint: final_path,
            checkpoints,
        })
    }
}

/// Convenience entry point covering both schedules.
pub fn run_training(
    net_cfg: NetConfig,
    train_cfg: TrainConfig,
    schedule: Schedule,
    data: &TrainSet,
    out_dir: &Path,
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(net_cfg, train_cfg, schedule)?;
    trainer.run(data, out_dir, None)
}
