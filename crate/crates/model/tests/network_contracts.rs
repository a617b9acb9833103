use autodiff::{NArray, SeedStream, Tape};
use model::init::init_params;
use model::net::NetCtx;
use model::networks;
use model::types::Mode;
use model::NetConfig;

fn desk() -> NetConfig {
    NetConfig::desk()
}

fn random_image(cfg: &NetConfig, rng: &mut SeedStream, n: usize) -> NArray<f32> {
    rng.uniform_array(&[n, cfg.image_channels, cfg.image_size, cfg.image_size], 0.0, 1.0)
}

#[test]
fn content_encoder_shape_and_determinism() {
    let cfg = desk();
    let params = init_params::<f32>(&cfg, 1).unwrap();
    let mut rng = SeedStream::new(2);
    let img = random_image(&cfg, &mut rng, 2);

    let run = |mode: Mode| {
        let tape = Tape::new();
        let ctx = NetCtx::new(&tape, &params, &cfg);
        let z = networks::content_encode(&ctx, tape.leaf(img.clone()), mode).unwrap();
        (z.shape(), z.value().data().to_vec())
    };
    let (shape, a1) = run(Mode::Autoencode);
    assert_eq!(
        shape,
        vec![2, cfg.latent_channels, cfg.latent_size(), cfg.latent_size()]
    );
    let (_, a2) = run(Mode::Autoencode);
    assert_eq!(a1, a2, "same inputs and parameters must give identical latents");
}

#[test]
fn content_encoder_rejects_wrong_resolution() {
    let cfg = desk();
    let params = init_params::<f32>(&cfg, 1).unwrap();
    let tape = Tape::new();
    let ctx = NetCtx::new(&tape, &params, &cfg);
    let bad = tape.leaf(NArray::zeros(&[1, 3, 32, 32]));
    assert!(networks::content_encode(&ctx, bad, Mode::Autoencode).is_err());
}

#[test]
fn mode_swap_uses_identical_parameter_set() {
    let cfg = desk();
    let params = init_params::<f32>(&cfg, 3).unwrap();
    let mut rng = SeedStream::new(4);
    let img = random_image(&cfg, &mut rng, 1);
    let used = |mode: Mode| {
        let tape = Tape::new();
        let ctx = NetCtx::new(&tape, &params, &cfg);
        networks::content_encode(&ctx, tape.leaf(img.clone()), mode).unwrap();
        let mut names = tape.param_names();
        names.sort();
        names
    };
    // All convolution/dense weights are shared between modes; the mode only
    // changes the adaptation-unit input.
    assert_eq!(used(Mode::Autoencode), used(Mode::Translate));
}

#[test]
fn mode_conditioning_changes_outputs_once_adaptation_is_nonzero() {
    let cfg = desk();
    let mut params = init_params::<f32>(&cfg, 5).unwrap();
    // Fresh models start at identity modulation for both modes; nudge one
    // adaptation weight the way training immediately would.
    params
        .get_mut("enc/stage0/adapt_u/w")
        .unwrap()
        .value
        .data_mut()[1] = 0.5;
    let mut rng = SeedStream::new(6);
    let img = random_image(&cfg, &mut rng, 1);
    let run = |mode: Mode| {
        let tape = Tape::new();
        let ctx = NetCtx::new(&tape, &params, &cfg);
        networks::content_encode(&ctx, tape.leaf(img.clone()), mode)
            .unwrap()
            .value()
            .data()
            .to_vec()
    };
    assert_ne!(run(Mode::Autoencode), run(Mode::Translate));
}

#[test]
fn mapping_network_is_deterministic_with_correct_length() {
    let cfg = desk();
    let params = init_params::<f32>(&cfg, 7).unwrap();
    let mut rng = SeedStream::new(8);
    let w = rng.uniform_array(&[3, cfg.style_seed_dim], -1.0, 1.0);
    let run = || {
        let tape = Tape::new();
        let ctx = NetCtx::new(&tape, &params, &cfg);
        let s = networks::style_from_latent(&ctx, tape.leaf(w.clone()), &[0, 1, 1]).unwrap();
        assert_eq!(s.shape(), vec![3, cfg.style_dim]);
        s.value().data().to_vec()
    };
    assert_eq!(run(), run());
}

#[test]
fn mapping_network_distinguishes_seeds_and_rejects_bad_labels() {
    let cfg = desk();
    let params = init_params::<f32>(&cfg, 9).unwrap();
    let mut rng = SeedStream::new(10);
    let w1 = rng.uniform_array::<f32>(&[1, cfg.style_seed_dim], -1.0, 1.0);
    let w2 = rng.uniform_array::<f32>(&[1, cfg.style_seed_dim], -1.0, 1.0);
    let tape = Tape::new();
    let ctx = NetCtx::new(&tape, &params, &cfg);
    let s1 = networks::style_from_latent(&ctx, tape.leaf(w1), &[1]).unwrap();
    let s2 = networks::style_from_latent(&ctx, tape.leaf(w2), &[1]).unwrap();
    assert_ne!(s1.value().data(), s2.value().data());
    let w3 = tape.leaf(NArray::zeros(&[1, cfg.style_seed_dim]));
    assert!(networks::style_from_latent(&ctx, w3, &[cfg.domains]).is_err());
}

#[test]
fn style_encoder_contract() {
    let cfg = desk();
    let params = init_params::<f32>(&cfg, 11).unwrap();
    let mut rng = SeedStream::new(12);
    let a = random_image(&cfg, &mut rng, 1);
    let b = random_image(&cfg, &mut rng, 1);
    let tape = Tape::new();
    let ctx = NetCtx::new(&tape, &params, &cfg);
    let sa1 = networks::style_from_reference(&ctx, tape.leaf(a.clone()), &[0]).unwrap();
    let sa2 = networks::style_from_reference(&ctx, tape.leaf(a.clone()), &[0]).unwrap();
    let sb = networks::style_from_reference(&ctx, tape.leaf(b), &[0]).unwrap();
    assert_eq!(sa1.value().data(), sa2.value().data());
    assert_eq!(sa1.shape(), vec![1, cfg.style_dim]);
    assert_ne!(sa1.value().data(), sb.value().data());
}

#[test]
fn autoencode_decode_is_bit_identical_under_any_style() {
    let cfg = desk();
    let params = init_params::<f32>(&cfg, 13).unwrap();
    let mut rng = SeedStream::new(14);
    let z = rng.uniform_array(
        &[1, cfg.latent_channels, cfg.latent_size(), cfg.latent_size()],
        -2.0,
        2.0,
    );
    let run = |style_seed: u64| {
        let tape = Tape::new();
        let ctx = NetCtx::new(&tape, &params, &cfg);
        let mut srng = SeedStream::new(style_seed);
        let s = tape.leaf(srng.uniform_array(&[1, cfg.style_dim], -3.0, 3.0));
        networks::decode(&ctx, tape.leaf(z.clone()), Some(s), Mode::Autoencode)
            .unwrap()
            .value()
            .data()
            .to_vec()
    };
    let out1 = run(100);
    let out2 = run(200);
    assert_eq!(out1, out2, "A-mode output must ignore the style bit-exactly");
}

#[test]
fn decode_shape_and_translation_style_requirement() {
    let cfg = desk();
    let params = init_params::<f32>(&cfg, 15).unwrap();
    let tape = Tape::new();
    let ctx = NetCtx::new(&tape, &params, &cfg);
    let z = tape.leaf(NArray::zeros(&[
        1,
        cfg.latent_channels,
        cfg.latent_size(),
        cfg.latent_size(),
    ]));
    let out = networks::decode(&ctx, z, None, Mode::Autoencode).unwrap();
    assert_eq!(
        out.shape(),
        vec![1, cfg.image_channels, cfg.image_size, cfg.image_size]
    );
    assert!(networks::decode(&ctx, z, None, Mode::Translate).is_err());
}

#[test]
fn translation_decode_responds_to_style_when_modulation_nonzero() {
    let cfg = desk();
    let mut params = init_params::<f32>(&cfg, 16).unwrap();
    // Give the decoder's style pathway a nonzero weight, as training would.
    let w = &mut params.get_mut("gen/stage2/adapt_u/w").unwrap().value;
    w.data_mut()[2 + 3] = 0.4; // column 3 of the style block
    let mut rng = SeedStream::new(17);
    let z = rng.uniform_array(
        &[1, cfg.latent_channels, cfg.latent_size(), cfg.latent_size()],
        -1.0,
        1.0,
    );
    let run = |seed: u64| {
        let tape = Tape::new();
        let ctx = NetCtx::new(&tape, &params, &cfg);
        let mut srng = SeedStream::new(seed);
        let s = tape.leaf(srng.uniform_array(&[1, cfg.style_dim], -1.0, 1.0));
        networks::decode(&ctx, tape.leaf(z.clone()), Some(s), Mode::Translate)
            .unwrap()
            .value()
            .data()
            .to_vec()
    };
    assert_ne!(run(1), run(2), "distinct styles must give distinct translations");
}

#[test]
fn ada_res_block_reduces_to_plain_residual_at_identity_modulation() {
    let cfg = desk();
    let params = init_params::<f32>(&cfg, 18).unwrap();
    let mut rng = SeedStream::new(19);
    let x = rng.uniform_array::<f32>(&[1, cfg.stem_channels, 8, 8], -1.0, 1.0);

    // Adaptation weights are zero-initialized, so scale = 1, shift = 0 and
    // the block must equal conv -> norm -> activation + projected skip.
    let tape = Tape::new();
    let ctx = NetCtx::new(&tape, &params, &cfg);
    let onehot = tape.leaf(Mode::Autoencode.one_hot::<f32>(1));
    let block = networks::ada_res_block(&ctx, tape.leaf(x.clone()), "enc/stage0", onehot).unwrap();

    let tape2 = Tape::new();
    let ctx2 = NetCtx::new(&tape2, &params, &cfg);
    let xv = tape2.leaf(x);
    let h = ctx2.conv(xv, "enc/stage0/conv", 1, 1).unwrap();
    let h = h.instance_norm(cfg.norm_eps as f32).unwrap();
    let h = ctx2.lrelu(h);
    let skip = ctx2.conv(xv, "enc/stage0/skip", 1, 0).unwrap();
    let plain = skip.add(h).unwrap();

    assert_eq!(block.value().data(), plain.value().data());
}

#[test]
fn per_channel_modulation_arithmetic() {
    // A feature value of 1.0 under scale 2 and shift 0.5 becomes 2.5.
    let tape = Tape::<f32>::new();
    let x = tape.leaf(NArray::filled(&[1, 1, 2, 2], 1.0));
    let u = tape.leaf(NArray::filled(&[1, 1], 2.0));
    let r = tape.leaf(NArray::filled(&[1, 1], 0.5));
    let y = x.channel_affine(u, r).unwrap();
    assert!(y.value().data().iter().all(|&v| v == 2.5));
}

#[test]
fn discriminators_are_scalar_per_sample_and_disjoint() {
    let cfg = desk();
    let params = init_params::<f32>(&cfg, 20).unwrap();
    let mut rng = SeedStream::new(21);
    let img = random_image(&cfg, &mut rng, 3);
    let tape = Tape::new();
    let ctx = NetCtx::new(&tape, &params, &cfg);
    let lt = networks::discriminate(&ctx, tape.leaf(img.clone()), &[0, 1, 0], Mode::Translate)
        .unwrap();
    assert_eq!(lt.shape(), vec![3, 1]);
    assert!(lt.value().all_finite());
    let names_t = tape.param_names();

    let tape2 = Tape::new();
    let ctx2 = NetCtx::new(&tape2, &params, &cfg);
    networks::discriminate(&ctx2, tape2.leaf(img), &[1, 1, 1], Mode::Autoencode).unwrap();
    let names_a = tape2.param_names();
    assert!(names_t.iter().all(|n| n.starts_with("disc_t/")));
    assert!(names_a.iter().all(|n| n.starts_with("disc_a/")));

    let tape3 = Tape::new();
    let ctx3 = NetCtx::new(&tape3, &params, &cfg);
    let z = tape3.leaf(NArray::zeros(&[1, 3, cfg.image_size, cfg.image_size]));
    assert!(networks::discriminate(&ctx3, z, &[cfg.domains], Mode::Translate).is_err());
}

#[test]
fn adaptation_gradients_match_finite_differences() {
    let cfg = desk();
    let params = init_params::<f64>(&cfg, 22).unwrap();
    let mut rng = SeedStream::new(23);
    let x = rng.uniform_array::<f64>(&[1, cfg.stem_channels, 8, 8], -1.0, 1.0);

    let loss_of = |p: &autodiff::ParamTree<f64>| -> f64 {
        let tape = Tape::new();
        let ctx = NetCtx::new(&tape, p, &cfg);
        let onehot = tape.leaf(Mode::Translate.one_hot::<f64>(1));
        let y = networks::ada_res_block(&ctx, tape.leaf(x.clone()), "enc/stage0", onehot).unwrap();
        y.tanh().sum_all().item()
    };

    // Analytic gradients for the adaptation parameters.
    let tape = Tape::new();
    let ctx = NetCtx::new(&tape, &params, &cfg);
    let onehot = tape.leaf(Mode::Translate.one_hot::<f64>(1));
    let y = networks::ada_res_block(&ctx, tape.leaf(x.clone()), "enc/stage0", onehot).unwrap();
    let root = y.tanh().sum_all();
    let grads = tape.backward(root).unwrap();
    let by_name = tape.param_grads(&grads);

    let step = 1e-5;
    for name in ["enc/stage0/adapt_u/w", "enc/stage0/adapt_r/w"] {
        let g = by_name.get(name).unwrap_or_else(|| panic!("no grad for {name}"));
        for idx in [0usize, 1] {
            let mut probe = params.clone();
            probe.get_mut(name).unwrap().value.data_mut()[idx] += step;
            let up = loss_of(&probe);
            probe.get_mut(name).unwrap().value.data_mut()[idx] -= 2.0 * step;
            let down = loss_of(&probe);
            let numeric = (up - down) / (2.0 * step);
            let analytic = g.data()[idx];
            let denom = analytic.abs().max(numeric.abs()).max(1e-6);
            assert!(
                (analytic - numeric).abs() / denom < 1e-4,
                "{name}[{idx}]: analytic {analytic}, numeric {numeric}"
            );
        }
    }
}
