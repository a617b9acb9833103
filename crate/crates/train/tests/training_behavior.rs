use autodiff::{NArray, SeedStream};
use model::init::init_params;
use model::NetConfig;
use train::losses::{loss_autoencoding, loss_discriminator, loss_translation, Batch, TranslationWeights};
use train::noise::{draw_autoencode_noise, draw_translation_noise};
use train::report::{LossCsv, ReportMode};
use train::trainer::{run_training, TrainSet, Trainer};
use train::{Schedule, TrainConfig};

/// Tiny geometry for machinery tests: 16x16 images, two stages, latent 4x4.
fn micro_net() -> NetConfig {
    NetConfig {
        image_size: 16,
        stem_channels: 4,
        stage_channels: vec![6, 8],
        latent_channels: 4,
        style_dim: 4,
        style_seed_dim: 3,
        mapping_hidden: 8,
        hyper_channels: 4,
        ..NetConfig::desk()
    }
}

fn micro_train(seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        batch_size: 2,
        pretrain_iters: 2,
        joint_iters: 3,
        checkpoint_every: 0,
        ..TrainConfig::default()
    }
}

fn random_set(cfg: &NetConfig, count: usize, seed: u64) -> TrainSet {
    let mut rng = SeedStream::new(seed);
    let images = (0..count)
        .map(|_| rng.uniform_array(&[cfg.image_channels, cfg.image_size, cfg.image_size], 0.0, 1.0))
        .collect();
    let labels = (0..count).map(|i| i % cfg.domains).collect();
    TrainSet { images, labels }
}

fn random_batch(cfg: &NetConfig, n: usize, seed: u64) -> Batch<f32> {
    let mut rng = SeedStream::new(seed);
    Batch {
        images: rng.uniform_array(&[n, cfg.image_channels, cfg.image_size, cfg.image_size], 0.0, 1.0),
        labels: (0..n).map(|i| i % cfg.domains).collect(),
    }
}

fn weights(gamma_diversity: f64, lambda: f64) -> TranslationWeights {
    TranslationWeights {
        gamma_style: 1.0,
        gamma_diversity,
        gamma_cycle: 1.0,
        lambda_rate: lambda,
    }
}

#[test]
fn diversity_term_is_exactly_zero_for_identical_styles() {
    let cfg = micro_net();
    let params = init_params::<f32>(&cfg, 1).unwrap();
    let batch = random_batch(&cfg, 2, 2);
    let mut rng = SeedStream::new(3);
    let mut noise = draw_translation_noise::<f32>(&mut rng, &cfg, 2);
    noise.w2 = noise.w1.clone();
    let out = loss_translation(&params, &cfg, &batch, &noise, &weights(1.0, 0.1)).unwrap();
    assert_eq!(out.ds, 0.0, "identical style draws must give zero diversity");
}

#[test]
fn diversity_enters_the_total_with_a_minus_sign() {
    let cfg = micro_net();
    let mut params = init_params::<f32>(&cfg, 4).unwrap();
    // Fresh models start at identity modulation, which makes the decoder
    // style-blind; open the style pathway the way training immediately
    // would so the two style draws actually produce different images.
    params
        .get_mut("gen/stage1/adapt_u/w")
        .unwrap()
        .value
        .data_mut()[2 + 2] = 0.5;
    let batch = random_batch(&cfg, 2, 5);
    let mut rng = SeedStream::new(6);
    let noise = draw_translation_noise::<f32>(&mut rng, &cfg, 2);
    let with = loss_translation(&params, &cfg, &batch, &noise, &weights(1.0, 0.1)).unwrap();
    let without = loss_translation(&params, &cfg, &batch, &noise, &weights(0.0, 0.1)).unwrap();
    assert!(with.ds > 0.0);
    let expect = without.total - with.ds;
    assert!(
        (with.total - expect).abs() <= 1e-6 * expect.abs().max(1.0),
        "total with diversity {} vs expected {}",
        with.total,
        expect
    );
}

#[test]
fn translation_total_matches_assembly_identity() {
    let cfg = micro_net();
    let params = init_params::<f32>(&cfg, 7).unwrap();
    let batch = random_batch(&cfg, 2, 8);
    let mut rng = SeedStream::new(9);
    let noise = draw_translation_noise::<f32>(&mut rng, &cfg, 2);
    let w = TranslationWeights {
        gamma_style: 0.7,
        gamma_diversity: 0.4,
        gamma_cycle: 1.3,
        lambda_rate: 0.25,
    };
    let out = loss_translation(&params, &cfg, &batch, &noise, &w).unwrap();
    let assembled = out.adv + w.gamma_style * out.sty - w.gamma_diversity * out.ds
        + w.gamma_cycle * out.cyc
        + w.lambda_rate * out.rate_bpp;
    assert!(
        (out.total - assembled).abs() <= 1e-6 * assembled.abs().max(1.0),
        "total {} vs assembled {}",
        out.total,
        assembled
    );
}

#[test]
fn autoencode_with_zero_lambda_is_distortion_plus_adversarial() {
    let cfg = micro_net();
    let params = init_params::<f32>(&cfg, 10).unwrap();
    let batch = random_batch(&cfg, 2, 11);
    let mut rng = SeedStream::new(12);
    let noise = draw_autoencode_noise::<f32>(&mut rng, &cfg, 2);
    let beta = 0.9;
    let out = loss_autoencoding(&params, &cfg, &batch, &noise, 0.0, beta, true, true).unwrap();
    let expect = out.rd_distortion + beta * out.adv2;
    assert!((out.total - expect).abs() <= 1e-6 * expect.abs().max(1.0));
}

#[test]
fn doubling_lambda_doubles_the_rate_contribution_exactly() {
    let cfg = micro_net();
    let params = init_params::<f32>(&cfg, 13).unwrap();
    let batch = random_batch(&cfg, 2, 14);
    let mut rng = SeedStream::new(15);
    let noise = draw_autoencode_noise::<f32>(&mut rng, &cfg, 2);
    let a = loss_autoencoding(&params, &cfg, &batch, &noise, 5.0, 1.0, true, true).unwrap();
    let b = loss_autoencoding(&params, &cfg, &batch, &noise, 10.0, 1.0, true, true).unwrap();
    assert!((a.rate_bpp - b.rate_bpp).abs() < 1e-12, "same inputs, same rate");
    let delta = b.total - a.total;
    let expect = 5.0 * a.rate_bpp;
    assert!(
        (delta - expect).abs() <= 1e-5 * expect.abs().max(1e-6),
        "delta {delta} vs lambda*rate {expect}"
    );
}

#[test]
fn generator_and_discriminator_gradients_are_disjoint() {
    let cfg = micro_net();
    let params = init_params::<f32>(&cfg, 16).unwrap();
    let batch = random_batch(&cfg, 2, 17);
    let mut rng = SeedStream::new(18);
    let noise = draw_translation_noise::<f32>(&mut rng, &cfg, 2);
    let out = loss_translation(&params, &cfg, &batch, &noise, &weights(1.0, 0.1)).unwrap();
    assert!(!out.gen_grads.is_empty());
    assert!(out.gen_grads.keys().all(|k| !k.starts_with("disc_")));

    let disc = loss_discriminator(
        &params,
        &cfg,
        &batch.images,
        &batch.labels,
        &out.fake,
        &noise.target_labels,
        model::types::Mode::Translate,
        1.0,
    )
    .unwrap();
    assert!(!disc.grads.is_empty());
    assert!(disc.grads.keys().all(|k| k.starts_with("disc_t/")));
    assert!(disc.r1 >= 0.0);
}

#[test]
fn pretrain_phase_touches_only_encoder_and_decoder() {
    let cfg = micro_net();
    let tc = TrainConfig {
        joint_iters: 0,
        pretrain_iters: 3,
        ..micro_train(42)
    };
    let data = random_set(&cfg, 8, 19);
    let mut trainer = Trainer::new(cfg.clone(), tc, Schedule::Ui2iCodec).unwrap();
    let before: Vec<(String, Vec<f32>)> = trainer
        .params
        .iter()
        .map(|(k, p)| (k.clone(), p.value.data().to_vec()))
        .collect();
    let dir = tempfile::tempdir().unwrap();
    trainer.run(&data, dir.path(), None).unwrap();
    for (name, old) in &before {
        let now = trainer.params.value(name).unwrap().data();
        let frozen = ["map/", "sty/", "disc_t/", "disc_a/", "entropy/"]
            .iter()
            .any(|p| name.starts_with(p));
        if frozen {
            assert_eq!(now, &old[..], "{name} must be untouched by pretraining");
        }
    }
    // The adaptive encoder/decoder must actually have moved.
    let moved = before
        .iter()
        .filter(|(name, _)| name.starts_with("enc/") || name.starts_with("gen/"))
        .any(|(name, old)| trainer.params.value(name).unwrap().data() != &old[..]);
    assert!(moved, "pretraining never updated the autoencoder");
}

#[test]
fn seeded_runs_produce_identical_loss_logs() {
    let cfg = micro_net();
    let data = random_set(&cfg, 8, 20);
    let run = |dir: &std::path::Path| {
        run_training(cfg.clone(), micro_train(7), Schedule::Ui2iCodec, &data, dir).unwrap();
        std::fs::read_to_string(dir.join("loss_log.csv")).unwrap()
    };
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    assert_eq!(run(d1.path()), run(d2.path()), "seeded runs must match bit-exactly");
}

#[test]
fn translation_only_schedule_equals_unified_with_autoencoding_disabled() {
    let cfg = micro_net();
    let data = random_set(&cfg, 8, 21);
    let tc_i2i = TrainConfig {
        pretrain_iters: 0,
        ..micro_train(9)
    };
    let tc_unified = TrainConfig {
        pretrain_iters: 0,
        enable_autoencoding: false,
        ..micro_train(9)
    };
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    run_training(cfg.clone(), tc_i2i, Schedule::I2iCodec, &data, d1.path()).unwrap();
    run_training(cfg.clone(), tc_unified, Schedule::Ui2iCodec, &data, d2.path()).unwrap();
    let a = std::fs::read_to_string(d1.path().join("loss_log.csv")).unwrap();
    let b = std::fs::read_to_string(d2.path().join("loss_log.csv")).unwrap();
    assert_eq!(a, b, "the translation-only trainer is the unified step with A off");
}

#[test]
fn resume_reproduces_the_uninterrupted_run_exactly() {
    let cfg = micro_net();
    let data = random_set(&cfg, 8, 22);
    let tc = TrainConfig {
        pretrain_iters: 1,
        joint_iters: 5,
        checkpoint_every: 2,
        ..micro_train(11)
    };

    let full_dir = tempfile::tempdir().unwrap();
    run_training(cfg.clone(), tc.clone(), Schedule::Ui2iCodec, &data, full_dir.path()).unwrap();
    let full_rows = LossCsv::read_all(&full_dir.path().join("loss_log.csv")).unwrap();

    // Restart from the mid-run checkpoint (after 2 joint iterations).
    let ckpt = full_dir.path().join("ckpt_0000003.ckpt");
    assert!(ckpt.exists(), "expected a mid-run checkpoint");
    let mut resumed = Trainer::from_checkpoint(&ckpt).unwrap();
    let resume_dir = tempfile::tempdir().unwrap();
    resumed.run(&data, resume_dir.path(), None).unwrap();
    let resumed_rows = LossCsv::read_all(&resume_dir.path().join("loss_log.csv")).unwrap();

    let tail: Vec<_> = full_rows
        .iter()
        .filter(|r| r.iteration >= 3)
        .cloned()
        .collect();
    assert_eq!(tail.len(), resumed_rows.len());
    for (a, b) in tail.iter().zip(resumed_rows.iter()) {
        assert_eq!(a, b, "resumed row diverged at iteration {}", a.iteration);
    }
}

#[test]
fn joint_rows_satisfy_both_assembly_identities() {
    let cfg = micro_net();
    let data = random_set(&cfg, 8, 23);
    let tc = micro_train(13);
    let dir = tempfile::tempdir().unwrap();
    run_training(cfg.clone(), tc.clone(), Schedule::Ui2iCodec, &data, dir.path()).unwrap();
    let rows = LossCsv::read_all(&dir.path().join("loss_log.csv")).unwrap();
    assert!(rows.iter().any(|r| r.mode == ReportMode::Translate));
    for r in rows {
        match r.mode {
            ReportMode::Translate => {
                let assembled = r.adv + tc.gamma_style * r.sty - r.gamma_ds_eff * r.ds
                    + tc.gamma_cycle * r.cyc
                    + tc.lambda_translate * r.rate_bpp;
                assert!(
                    (r.total_t - assembled).abs() <= 1e-6 * assembled.abs().max(1.0),
                    "iteration {}: total_t {} vs {}",
                    r.iteration,
                    r.total_t,
                    assembled
                );
            }
            ReportMode::Autoencode => {
                let rate = if r.rate_bpp > 0.0 {
                    tc.lambda_autoencode * r.rate_bpp
                } else {
                    0.0
                };
                let assembled = r.rd_distortion + rate + tc.beta_adv_autoencode * r.adv2;
                assert!(
                    (r.total_a - assembled).abs() <= 1e-6 * assembled.abs().max(1.0),
                    "iteration {}: total_a {} vs {}",
                    r.iteration,
                    r.total_a,
                    assembled
                );
            }
        }
    }
}

#[test]
fn loss_assemblies_match_finite_differences_at_f64() {
    let cfg = micro_net();
    let params = init_params::<f64>(&cfg, 31).unwrap();
    let mut brng = SeedStream::new(32);
    let batch = Batch::<f64> {
        images: brng.uniform_array(&[2, cfg.image_channels, cfg.image_size, cfg.image_size], 0.0, 1.0),
        labels: vec![0, 1],
    };
    let mut rng = SeedStream::new(33);
    let tnoise = draw_translation_noise::<f64>(&mut rng, &cfg, 2);
    let anoise = draw_autoencode_noise::<f64>(&mut rng, &cfg, 2);
    let w = weights(0.8, 0.2);

    let t_loss = |p: &autodiff::ParamTree<f64>| {
        loss_translation(p, &cfg, &batch, &tnoise, &w).unwrap().total
    };
    let a_loss = |p: &autodiff::ParamTree<f64>| {
        loss_autoencoding(p, &cfg, &batch, &anoise, 5.0, 1.0, true, true)
            .unwrap()
            .total
    };

    let t_out = loss_translation(&params, &cfg, &batch, &tnoise, &w).unwrap();
    let a_out = loss_autoencoding(&params, &cfg, &batch, &anoise, 5.0, 1.0, true, true).unwrap();

    let mut probe_rng = SeedStream::new(34);
    let step = 1e-5;
    let mut check = |grads: &std::collections::BTreeMap<String, NArray<f64>>,
                     loss: &dyn Fn(&autodiff::ParamTree<f64>) -> f64,
                     probes: usize,
                     tag: &str| {
        let names: Vec<&String> = grads.keys().collect();
        for _ in 0..probes {
            let name = names[probe_rng.uniform_usize(names.len())];
            let g = &grads[name];
            let idx = probe_rng.uniform_usize(g.len());
            let mut p2 = params.clone();
            p2.get_mut(name).unwrap().value.data_mut()[idx] += step;
            let up = loss(&p2);
            p2.get_mut(name).unwrap().value.data_mut()[idx] -= 2.0 * step;
            let down = loss(&p2);
            let numeric = (up - down) / (2.0 * step);
            let analytic = g.data()[idx];
            let denom = analytic.abs().max(numeric.abs()).max(1e-6);
            assert!(
                (analytic - numeric).abs() / denom < 1e-4,
                "{tag} {name}[{idx}]: analytic {analytic}, numeric {numeric}"
            );
        }
    };
    check(&t_out.gen_grads, &t_loss, 10, "translation");
    check(&a_out.gen_grads, &a_loss, 10, "autoencoding");
}
