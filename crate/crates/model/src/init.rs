//! Parameter initialization. Conv and dense weights are fan-in-scaled
//! uniform with zero biases; adaptation units start at the identity
//! modulation (zero weights, so scale = 1 and shift = 0); the factorized
//! priors start as a wide monotone CDF.

use autodiff::{NArray, ParamTree, Real, SeedStream};

use crate::config::NetConfig;
use crate::Result;

fn conv_init<T: Real>(
    tree: &mut ParamTree<T>,
    rng: &mut SeedStream,
    prefix: &str,
    co: usize,
    ci: usize,
    k: usize,
) -> Result<()> {
    let bound = (1.0 / (ci * k * k) as f64).sqrt();
    tree.insert(
        &format!("{prefix}/w"),
        rng.uniform_array(&[co, ci, k, k], -bound, bound),
    )?;
    tree.insert(&format!("{prefix}/b"), NArray::zeros(&[co]))?;
    Ok(())
}

fn dense_init<T: Real>(
    tree: &mut ParamTree<T>,
    rng: &mut SeedStream,
    prefix: &str,
    dout: usize,
    din: usize,
) -> Result<()> {
    let bound = (1.0 / din as f64).sqrt();
    tree.insert(
        &format!("{prefix}/w"),
        rng.uniform_array(&[dout, din], -bound, bound),
    )?;
    tree.insert(&format!("{prefix}/b"), NArray::zeros(&[dout]))?;
    Ok(())
}

fn adapt_init<T: Real>(tree: &mut ParamTree<T>, prefix: &str, c: usize, adim: usize) -> Result<()> {
    for part in ["adapt_u", "adapt_r"] {
        tree.insert(&format!("{prefix}/{part}/w"), NArray::zeros(&[c, adim]))?;
        tree.insert(&format!("{prefix}/{part}/b"), NArray::zeros(&[c]))?;
    }
    Ok(())
}

fn ada_block_init<T: Real>(
    tree: &mut ParamTree<T>,
    rng: &mut SeedStream,
    prefix: &str,
    ci: usize,
    co: usize,
    adim: usize,
) -> Result<()> {
    conv_init(tree, rng, &format!("{prefix}/conv"), co, ci, 3)?;
    if ci != co {
        conv_init(tree, rng, &format!("{prefix}/skip"), co, ci, 1)?;
    }
    adapt_init(tree, prefix, co, adim)?;
    Ok(())
}

fn trunk_init<T: Real>(
    tree: &mut ParamTree<T>,
    rng: &mut SeedStream,
    root: &str,
    cfg: &NetConfig,
) -> Result<()> {
    conv_init(tree, rng, &format!("{root}/stem"), cfg.stem_channels, cfg.image_channels, 3)?;
    let mut ci = cfg.stem_channels;
    for (i, &co) in cfg.stage_channels.iter().enumerate() {
        conv_init(tree, rng, &format!("{root}/stage{i}"), co, ci, 3)?;
        ci = co;
    }
    Ok(())
}

fn prior_init<T: Real>(
    tree: &mut ParamTree<T>,
    rng: &mut SeedStream,
    root: &str,
    cfg: &NetConfig,
) -> Result<()> {
    let p = cfg.prior_hidden;
    // Per-layer positive weight chosen so the initial CDF is wide: the
    // slope at 0 is roughly p^2 * w^3 = 0.05, a scale of about 5 bins.
    let w0 = (0.05 / (p * p) as f64).cbrt();
    let raw = (w0.exp() - 1.0).ln();
    for c in 0..cfg.hyper_channels {
        let dims = [(p, 1), (p, p), (1, p)];
        for (layer, &(dout, din)) in dims.iter().enumerate() {
            let prefix = format!("{root}/ch{c}/l{layer}");
            tree.insert(
                &format!("{prefix}/w"),
                NArray::filled(&[dout, din], T::from_f64(raw)),
            )?;
            let bias = if layer == 0 {
                rng.uniform_array(&[dout], -1.5, 1.5)
            } else {
                NArray::zeros(&[dout])
            };
            tree.insert(&format!("{prefix}/b"), bias)?;
            if layer < 2 {
                tree.insert(&format!("{prefix}/a"), NArray::zeros(&[dout]))?;
            }
        }
    }
    Ok(())
}

/// Build the full parameter tree for a fresh model.
pub fn init_params<T: Real>(cfg: &NetConfig, seed: u64) -> Result<ParamTree<T>> {
    cfg.validate()?;
    let mut rng = SeedStream::new(seed);
    let mut tree = ParamTree::new();
    let stages = cfg.stage_channels.len();
    let c_last = *cfg.stage_channels.last().unwrap();
    let adapt_enc = 2;
    let adapt_dec = 2 + cfg.style_dim;

    // Content encoder.
    conv_init(&mut tree, &mut rng, "enc/stem", cfg.stem_channels, cfg.image_channels, 3)?;
    let mut ci = cfg.stem_channels;
    for (i, &co) in cfg.stage_channels.iter().enumerate() {
        ada_block_init(&mut tree, &mut rng, &format!("enc/stage{i}"), ci, co, adapt_enc)?;
        ci = co;
    }
    conv_init(&mut tree, &mut rng, "enc/head", cfg.latent_channels, c_last, 3)?;

    // Decoder (mirrored stages).
    conv_init(&mut tree, &mut rng, "gen/input", c_last, cfg.latent_channels, 3)?;
    for i in (0..stages).rev() {
        let cin = cfg.stage_channels[i];
        let cout = if i == 0 {
            cfg.stem_channels
        } else {
            cfg.stage_channels[i - 1]
        };
        ada_block_init(&mut tree, &mut rng, &format!("gen/stage{i}"), cin, cout, adapt_dec)?;
    }
    conv_init(&mut tree, &mut rng, "gen/mid", cfg.stem_channels, cfg.stem_channels, 3)?;
    conv_init(&mut tree, &mut rng, "gen/head", cfg.image_channels, cfg.stem_channels, 3)?;

    // Style encoder.
    trunk_init(&mut tree, &mut rng, "sty", cfg)?;
    dense_init(&mut tree, &mut rng, "sty/shared", c_last, c_last)?;
    for k in 0..cfg.domains {
        dense_init(&mut tree, &mut rng, &format!("sty/head{k}"), cfg.style_dim, c_last)?;
    }

    // Mapping network.
    dense_init(&mut tree, &mut rng, "map/fc0", cfg.mapping_hidden, cfg.style_seed_dim)?;
    for i in 1..4 {
        dense_init(&mut tree, &mut rng, &format!("map/fc{i}"), cfg.mapping_hidden, cfg.mapping_hidden)?;
    }
    for k in 0..cfg.domains {
        dense_init(&mut tree, &mut rng, &format!("map/head{k}"), cfg.style_dim, cfg.mapping_hidden)?;
    }

    // Task discriminators, disjoint parameter sets.
    for root in ["disc_t", "disc_a"] {
        trunk_init(&mut tree, &mut rng, root, cfg)?;
        conv_init(&mut tree, &mut rng, &format!("{root}/final"), c_last, c_last, 3)?;
        dense_init(&mut tree, &mut rng, &format!("{root}/out"), cfg.domains, c_last)?;
    }

    // Entropy model: shared hyper transforms, per-mode factorized priors.
    conv_init(&mut tree, &mut rng, "entropy/hyper_enc/c0", cfg.hyper_channels, cfg.latent_channels, 3)?;
    conv_init(&mut tree, &mut rng, "entropy/hyper_enc/c1", cfg.hyper_channels, cfg.hyper_channels, 3)?;
    conv_init(&mut tree, &mut rng, "entropy/hyper_dec/c0", cfg.hyper_channels, cfg.hyper_channels, 3)?;
    conv_init(&mut tree, &mut rng, "entropy/hyper_dec/c1", cfg.latent_channels, cfg.hyper_channels, 3)?;
    prior_init(&mut tree, &mut rng, "entropy/prior_a", cfg)?;
    prior_init(&mut tree, &mut rng, "entropy/prior_t", cfg)?;

    Ok(tree)
}
