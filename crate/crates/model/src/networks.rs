//! The five codec networks. Everything is a pure function of (inputs,
//! parameters, mode, style); training and inference share these graphs.

use autodiff::tape::select_per_row;
use autodiff::{NArray, Real, Var};

use crate::net::NetCtx;
use crate::types::Mode;
use crate::{ModelError, Result};

fn batch_of<T: Real>(x: Var<'_, T>) -> usize {
    x.shape()[0]
}

/// Adaptive residual block: `x + f(modulate(normalize(conv(x))))` with the
/// per-channel affine modulation computed as a linear function of the
/// adaptation input (mode one-hot, optionally concatenated with the style).
/// A 1x1 projection carries the skip path when the channel count changes.
pub fn ada_res_block<'t, T: Real>(
    ctx: &NetCtx<'t, T>,
    x: Var<'t, T>,
    prefix: &str,
    adapt: Var<'t, T>,
) -> Result<Var<'t, T>> {
    let h = ctx.conv(x, &format!("{prefix}/conv"), 1, 1)?;
    let h = h.instance_norm(T::from_f64(ctx.config.norm_eps))?;
    let scale = ctx
        .dense(adapt, &format!("{prefix}/adapt_u"))?
        .add_scalar(T::ONE);
    let shift = ctx.dense(adapt, &format!("{prefix}/adapt_r"))?;
    let h = h.channel_affine(scale, shift)?;
    let h = ctx.lrelu(h);
    let skip = if ctx.params.contains(&format!("{prefix}/skip/w")) {
        ctx.conv(x, &format!("{prefix}/skip"), 1, 0)?
    } else {
        x
    };
    Ok(skip.add(h)?)
}

/// Content encoder: stride-2 stem, one adaptive residual stage per
/// downsampling level, and a head conv producing the content latent.
pub fn content_encode<'t, T: Real>(
    ctx: &NetCtx<'t, T>,
    x: Var<'t, T>,
    mode: Mode,
) -> Result<Var<'t, T>> {
    let cfg = ctx.config;
    let n = batch_of(x);
    let expect = [n, cfg.image_channels, cfg.image_size, cfg.image_size];
    if x.shape() != expect {
        return Err(ModelError::Autodiff(autodiff::Error::InvalidShape(format!(
            "content encoder expects {:?}, got {:?}",
            expect,
            x.shape()
        ))));
    }
    let onehot = ctx.tape.leaf(mode.one_hot::<T>(n));
    let mut h = ctx.lrelu(ctx.conv(x, "enc/stem", 2, 1)?);
    let stages = cfg.stage_channels.len();
    for i in 0..stages {
        h = ada_res_block(ctx, h, &format!("enc/stage{i}"), onehot)?;
        if i + 1 < stages {
            h = h.downsample(2)?;
        }
    }
    ctx.conv(h, "enc/head", 1, 1)
}

/// Decoder: latent in, image out. In translation mode the adaptation input
/// is `[one-hot(mode), style]`; in autoencoding mode the style slot is
/// zeroed, which is what makes the output bit-identical for any style.
pub fn decode<'t, T: Real>(
    ctx: &NetCtx<'t, T>,
    z: Var<'t, T>,
    style: Option<Var<'t, T>>,
    mode: Mode,
) -> Result<Var<'t, T>> {
    let cfg = ctx.config;
    let n = batch_of(z);
    let style_in = match mode {
        Mode::Translate => style.ok_or_else(|| {
            ModelError::InvalidArgument("translation decode requires a style vector".into())
        })?,
        Mode::Autoencode => ctx.tape.leaf(NArray::zeros(&[n, cfg.style_dim])),
    };
    let onehot = ctx.tape.leaf(mode.one_hot::<T>(n));
    let adapt = onehot.concat_cols(style_in)?;

    let mut h = ctx.lrelu(ctx.conv(z, "gen/input", 1, 1)?);
    let stages = cfg.stage_channels.len();
    for i in (0..stages).rev() {
        h = ada_res_block(ctx, h, &format!("gen/stage{i}"), adapt)?;
        if i > 0 {
            h = h.upsample(2)?;
        }
    }
    let h = ctx.lrelu(ctx.conv(h, "gen/mid", 1, 1)?);
    let h = h.upsample(2)?;
    ctx.conv(h, "gen/head", 1, 1)
}

/// Shared trunk used by the style encoder and the discriminators.
fn conv_trunk<'t, T: Real>(
    ctx: &NetCtx<'t, T>,
    x: Var<'t, T>,
    root: &str,
) -> Result<Var<'t, T>> {
    let stages = ctx.config.stage_channels.len();
    let mut h = ctx.lrelu(ctx.conv(x, &format!("{root}/stem"), 2, 1)?);
    for i in 0..stages {
        h = ctx.lrelu(ctx.conv(h, &format!("{root}/stage{i}"), 1, 1)?);
        if i + 1 < stages {
            h = h.downsample(2)?;
        }
    }
    Ok(h)
}

/// Mapping network: shared fully-connected stack, one output head per
/// domain, head selected per sample by the target label.
pub fn style_from_latent<'t, T: Real>(
    ctx: &NetCtx<'t, T>,
    seed: Var<'t, T>,
    labels: &[usize],
) -> Result<Var<'t, T>> {
    check_labels(ctx, labels)?;
    let mut h = seed;
    for i in 0..4 {
        h = ctx.lrelu(ctx.dense(h, &format!("map/fc{i}"))?);
    }
    let heads: Vec<Var<'t, T>> = (0..ctx.config.domains)
        .map(|k| ctx.dense(h, &format!("map/head{k}")))
        .collect::<Result<_>>()?;
    Ok(select_per_row(&heads, labels)?)
}

/// Style encoder: conv trunk, global pooling, per-domain output heads.
pub fn style_from_reference<'t, T: Real>(
    ctx: &NetCtx<'t, T>,
    image: Var<'t, T>,
    labels: &[usize],
) -> Result<Var<'t, T>> {
    check_labels(ctx, labels)?;
    let h = conv_trunk(ctx, image, "sty")?;
    let pooled = h.mean_spatial()?;
    let shared = ctx.lrelu(ctx.dense(pooled, "sty/shared")?);
    let heads: Vec<Var<'t, T>> = (0..ctx.config.domains)
        .map(|k| ctx.dense(shared, &format!("sty/head{k}")))
        .collect::<Result<_>>()?;
    Ok(select_per_row(&heads, labels)?)
}

/// Multi-task discriminator: conv trunk, K logits, the branch indexed by
/// the domain label is returned. `task` selects the translation-side or the
/// autoencoding-side discriminator; their parameters are disjoint.
pub fn discriminate<'t, T: Real>(
    ctx: &NetCtx<'t, T>,
    image: Var<'t, T>,
    labels: &[usize],
    task: Mode,
) -> Result<Var<'t, T>> {
    check_labels(ctx, labels)?;
    let root = match task {
        Mode::Translate => "disc_t",
        Mode::Autoencode => "disc_a",
    };
    let h = conv_trunk(ctx, image, root)?;
    let h = ctx.lrelu(ctx.conv(h, &format!("{root}/final"), 1, 1)?);
    let pooled = h.mean_spatial()?;
    let logits = ctx.dense(pooled, &format!("{root}/out"))?;
    Ok(logits.pick_cols(labels)?)
}

fn check_labels<T: Real>(ctx: &NetCtx<'_, T>, labels: &[usize]) -> Result<()> {
    if let Some(&bad) = labels.iter().find(|&&y| y >= ctx.config.domains) {
        return Err(ModelError::InvalidArgument(format!(
            "domain label {bad} out of range 0..{}",
            ctx.config.domains
        )));
    }
    Ok(())
}
