use autodiff::SeedStream;
use model::checkpoint;
use model::init::init_params;
use model::pipeline::{self, EncodeOptions, StyleBehavior};
use model::types::{Mode, StyleOrigin, StyleVector};
use model::NetConfig;

fn setup() -> (NetConfig, autodiff::ParamTree<f32>) {
    let cfg = NetConfig::desk();
    let params = init_params::<f32>(&cfg, 99).unwrap();
    (cfg, params)
}

fn test_image(cfg: &NetConfig, seed: u64) -> autodiff::NArray<f32> {
    let mut rng = SeedStream::new(seed);
    rng.uniform_array(&[cfg.image_channels, cfg.image_size, cfg.image_size], 0.0, 1.0)
}

#[test]
fn autoencode_roundtrip_is_deterministic() {
    let (cfg, params) = setup();
    let img = test_image(&cfg, 1);
    let opts = EncodeOptions {
        mode: Mode::Autoencode,
        target_domain: 0,
        style: StyleBehavior::None,
    };
    let r1 = pipeline::encode_image(&cfg, &params, &img, &opts).unwrap();
    let r2 = pipeline::encode_image(&cfg, &params, &img, &opts).unwrap();
    assert_eq!(r1.bytes, r2.bytes, "encoding must be deterministic");
    assert!(r1.bpp > 0.0);

    let (out1, mode1) = pipeline::decode_container(&cfg, &params, &r1.bytes, None).unwrap();
    let (out2, _) = pipeline::decode_container(&cfg, &params, &r1.bytes, None).unwrap();
    assert_eq!(mode1, Mode::Autoencode);
    assert_eq!(out1.data(), out2.data(), "decoding must be deterministic");
    assert!(out1.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
}

#[test]
fn translate_sender_style_roundtrip() {
    let (cfg, params) = setup();
    let img = test_image(&cfg, 2);
    let style = pipeline::style_from_seed(&cfg, &params, 7, 1).unwrap();
    assert_eq!(style.origin, StyleOrigin::LatentGuided);
    assert_eq!(style.values.len(), cfg.style_dim);
    let opts = EncodeOptions {
        mode: Mode::Translate,
        target_domain: 1,
        style: StyleBehavior::SenderSide(style.clone()),
    };
    let res = pipeline::encode_image(&cfg, &params, &img, &opts).unwrap();
    // Decoding needs nothing from the receiver: the style is embedded.
    let (out, mode) = pipeline::decode_container(&cfg, &params, &res.bytes, None).unwrap();
    assert_eq!(mode, Mode::Translate);
    assert_eq!(
        out.shape(),
        &[cfg.image_channels, cfg.image_size, cfg.image_size]
    );
}

#[test]
fn translate_receiver_style_requires_style_at_decode() {
    let (cfg, params) = setup();
    let img = test_image(&cfg, 3);
    let opts = EncodeOptions {
        mode: Mode::Translate,
        target_domain: 0,
        style: StyleBehavior::ReceiverSide,
    };
    let res = pipeline::encode_image(&cfg, &params, &img, &opts).unwrap();
    assert!(pipeline::decode_container(&cfg, &params, &res.bytes, None).is_err());
    let style = pipeline::style_from_seed(&cfg, &params, 11, 0).unwrap();
    let (out, _) = pipeline::decode_container(&cfg, &params, &res.bytes, Some(&style)).unwrap();
    assert!(out.all_finite());
}

#[test]
fn sender_style_costs_exactly_style_dim_times_four_bytes() {
    let (cfg, params) = setup();
    let img = test_image(&cfg, 4);
    let style = pipeline::style_from_seed(&cfg, &params, 5, 1).unwrap();
    let sender = pipeline::encode_image(
        &cfg,
        &params,
        &img,
        &EncodeOptions {
            mode: Mode::Translate,
            target_domain: 1,
            style: StyleBehavior::SenderSide(style),
        },
    )
    .unwrap();
    let receiver = pipeline::encode_image(
        &cfg,
        &params,
        &img,
        &EncodeOptions {
            mode: Mode::Translate,
            target_domain: 1,
            style: StyleBehavior::ReceiverSide,
        },
    )
    .unwrap();
    assert_eq!(
        sender.bytes.len() - receiver.bytes.len(),
        cfg.style_dim * 4,
        "style payload must cost exactly style_dim 32-bit values"
    );
}

#[test]
fn autoencode_rejects_style_arguments() {
    let (cfg, params) = setup();
    let img = test_image(&cfg, 5);
    let style = pipeline::style_from_seed(&cfg, &params, 5, 0).unwrap();
    let opts = EncodeOptions {
        mode: Mode::Autoencode,
        target_domain: 0,
        style: StyleBehavior::SenderSide(style),
    };
    assert!(pipeline::encode_image(&cfg, &params, &img, &opts).is_err());
}

#[test]
fn wrong_resolution_image_is_rejected() {
    let (cfg, params) = setup();
    let mut rng = SeedStream::new(6);
    let img = rng.uniform_array(&[3, 32, 32], 0.0, 1.0);
    let opts = EncodeOptions {
        mode: Mode::Autoencode,
        target_domain: 0,
        style: StyleBehavior::None,
    };
    assert!(pipeline::encode_image(&cfg, &params, &img, &opts).is_err());
}

#[test]
fn estimate_accompanies_every_encode() {
    let (cfg, params) = setup();
    let img = test_image(&cfg, 7);
    let res = pipeline::encode_image(
        &cfg,
        &params,
        &img,
        &EncodeOptions {
            mode: Mode::Autoencode,
            target_domain: 0,
            style: StyleBehavior::None,
        },
    )
    .unwrap();
    assert!(res.estimated_payload_bits > 0.0);
    assert!(res.estimated_container_bits > res.estimated_payload_bits);
}

#[test]
fn checkpoint_roundtrip_and_fingerprint() {
    let (cfg, params) = setup();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    checkpoint::save(&path, &cfg, &params, b"trainer-state", true).unwrap();
    let (cfg2, params2, meta) = checkpoint::load::<f32>(&path).unwrap();
    assert_eq!(cfg, cfg2);
    assert_eq!(meta, b"trainer-state");
    assert_eq!(params.len(), params2.len());
    for (name, p) in params.iter() {
        assert_eq!(p.value.data(), params2.get(name).unwrap().value.data());
    }
    let f1 = checkpoint::fingerprint_file(&path).unwrap();
    let f2 = checkpoint::fingerprint_file(&path).unwrap();
    assert_eq!(f1, f2);

    // A different parameter set has a different fingerprint.
    let other = init_params::<f32>(&cfg, 100).unwrap();
    let path2 = dir.path().join("other.ckpt");
    checkpoint::save(&path2, &cfg, &other, b"", true).unwrap();
    assert_ne!(f1, checkpoint::fingerprint_file(&path2).unwrap());
}

#[test]
fn encode_decode_work_at_paper_scale_config() {
    // The full-size configuration stays selectable; exercise its geometry
    // checks without running a forward pass (that would be slow).
    let cfg = NetConfig::paper_scale();
    cfg.validate().unwrap();
    assert_eq!(cfg.image_size, 256);
    assert_eq!(cfg.style_dim, 64);
    assert_eq!(cfg.latent_size(), 16);
    assert_eq!(cfg.hyper_size(), 4);
}
