//! Loss graphs. Each builder returns the scalar terms (for reporting and
//! the assembly-identity checks) together with the parameter gradients of
//! the side it optimizes. Generator-side and discriminator-side gradients
//! never overlap: generator updates exclude `disc_*` parameters, and the
//! discriminator graphs only ever touch their own prefix.

use std::collections::BTreeMap;

use autodiff::{NArray, ParamTree, Real, Tape};
use model::entropy::noisy_rate_path;
use model::net::NetCtx;
use model::networks::{content_encode, decode, discriminate, style_from_latent, style_from_reference};
use model::types::Mode;
use model::NetConfig;

use crate::noise::{AutoencodeNoise, TranslationNoise};
use crate::Result;

/// One training batch: images `[n, c, h, w]` and their source domains.
pub struct Batch<T> {
    pub images: NArray<T>,
    pub labels: Vec<usize>,
}

/// Effective loss weights for one iteration (diversity may be annealed).
#[derive(Clone, Copy, Debug)]
pub struct TranslationWeights {
    pub gamma_style: f64,
    pub gamma_diversity: f64,
    pub gamma_cycle: f64,
    pub lambda_rate: f64,
}

pub struct TranslationLoss<T> {
    pub adv: f64,
    pub sty: f64,
    pub ds: f64,
    pub cyc: f64,
    pub rate_bpp: f64,
    pub total: f64,
    pub gen_grads: BTreeMap<String, NArray<T>>,
    /// Detached translated batch for the discriminator update.
    pub fake: NArray<T>,
}

fn is_disc(name: &str) -> bool {
    name.starts_with("disc_t/") || name.starts_with("disc_a/")
}

fn pixels(cfg: &NetConfig) -> f64 {
    (cfg.image_size * cfg.image_size) as f64
}

/// Translation objective: adversarial realism in the target domain, style
/// reconstruction, diversity between two style draws, cycle consistency
/// back to the source with the source's own style, and the rate term.
pub fn loss_translation<T: Real>(
    params: &ParamTree<T>,
    cfg: &NetConfig,
    batch: &Batch<T>,
    noise: &TranslationNoise<T>,
    w: &TranslationWeights,
) -> Result<TranslationLoss<T>> {
    let n = batch.labels.len();
    let tape = Tape::new();
    let ctx = NetCtx::new(&tape, params, cfg);
    let x = tape.leaf(batch.images.clone());

    let z = content_encode(&ctx, x, Mode::Translate)?;
    let rate = noisy_rate_path(
        &ctx,
        z,
        noise.quant_z.clone(),
        noise.quant_h.clone(),
        Mode::Translate,
    )?;
    let rate_bpp = rate
        .total_bits
        .scale(T::from_f64(1.0 / (n as f64 * pixels(cfg))));

    let s1 = style_from_latent(&ctx, tape.leaf(noise.w1.clone()), &noise.target_labels)?;
    let s2 = style_from_latent(&ctx, tape.leaf(noise.w2.clone()), &noise.target_labels)?;
    let fake1 = decode(&ctx, rate.z_noisy, Some(s1), Mode::Translate)?;
    let fake2 = decode(&ctx, rate.z_noisy, Some(s2), Mode::Translate)?;

    // Non-saturating generator loss against the translation discriminator.
    let logits = discriminate(&ctx, fake1, &noise.target_labels, Mode::Translate)?;
    let adv = logits.neg().softplus().mean_all();

    let s_rec = style_from_reference(&ctx, fake1, &noise.target_labels)?;
    let sty = s1.l1_diff(s_rec)?;

    let ds = fake1.l1_diff(fake2)?;

    let s_src = style_from_reference(&ctx, x, &batch.labels)?;
    let z_cyc = content_encode(&ctx, fake1, Mode::Translate)?;
    let back = decode(&ctx, z_cyc, Some(s_src), Mode::Translate)?;
    let cyc = x.l1_diff(back)?;

    let total = adv
        .add(sty.scale(T::from_f64(w.gamma_style)))?
        .add(ds.scale(T::from_f64(-w.gamma_diversity)))?
        .add(cyc.scale(T::from_f64(w.gamma_cycle)))?
        .add(rate_bpp.scale(T::from_f64(w.lambda_rate)))?;

    let grads = tape.backward(total)?;
    let mut gen_grads = tape.param_grads(&grads);
    gen_grads.retain(|name, _| !is_disc(name));

    Ok(TranslationLoss {
        adv: adv.item().to_f64(),
        sty: sty.item().to_f64(),
        ds: ds.item().to_f64(),
        cyc: cyc.item().to_f64(),
        rate_bpp: rate_bpp.item().to_f64(),
        total: total.item().to_f64(),
        gen_grads,
        fake: fake1.value().as_ref().clone(),
    })
}

pub struct AutoencodeLoss<T> {
    pub rd_distortion: f64,
    pub rate_bpp: f64,
    pub adv2: f64,
    pub total: f64,
    pub gen_grads: BTreeMap<String, NArray<T>>,
    pub fake: NArray<T>,
}

/// Autoencoding objective: mean-squared distortion, the rate term weighted
/// by its own lambda, and optionally the second adversarial loss. With the
/// rate and adversarial parts disabled this is the distortion-only
/// pretraining objective.
pub fn loss_autoencoding<T: Real>(
    params: &ParamTree<T>,
    cfg: &NetConfig,
    batch: &Batch<T>,
    noise: &AutoencodeNoise<T>,
    lambda_rate: f64,
    beta_adv: f64,
    include_rate: bool,
    include_gan: bool,
) -> Result<AutoencodeLoss<T>> {
    let n = batch.labels.len();
    let tape = Tape::new();
    let ctx = NetCtx::new(&tape, params, cfg);
    let x = tape.leaf(batch.images.clone());

    let z = content_encode(&ctx, x, Mode::Autoencode)?;
    let (z_noisy, rate_bpp) = if include_rate {
        let rate = noisy_rate_path(
            &ctx,
            z,
            noise.quant_z.clone(),
            noise.quant_h.clone(),
            Mode::Autoencode,
        )?;
        let bpp = rate
            .total_bits
            .scale(T::from_f64(1.0 / (n as f64 * pixels(cfg))));
        (rate.z_noisy, Some(bpp))
    } else {
        (z.add(tape.leaf(noise.quant_z.clone()))?, None)
    };

    let recon = decode(&ctx, z_noisy, None, Mode::Autoencode)?;
    let rd = recon.l2_diff(x)?;

    let adv2 = if include_gan {
        let logits = discriminate(&ctx, recon, &batch.labels, Mode::Autoencode)?;
        Some(logits.neg().softplus().mean_all())
    } else {
        None
    };

    let mut total = rd;
    if let Some(bpp) = rate_bpp {
        total = total.add(bpp.scale(T::from_f64(lambda_rate)))?;
    }
    if let Some(a) = adv2 {
        total = total.add(a.scale(T::from_f64(beta_adv)))?;
    }

    let grads = tape.backward(total)?;
    let mut gen_grads = tape.param_grads(&grads);
    gen_grads.retain(|name, _| !is_disc(name));

    Ok(AutoencodeLoss {
        rd_distortion: rd.item().to_f64(),
        rate_bpp: rate_bpp.map(|b| b.item().to_f64()).unwrap_or(0.0),
        adv2: adv2.map(|a| a.item().to_f64()).unwrap_or(0.0),
        total: total.item().to_f64(),
        gen_grads,
        fake: recon.value().as_ref().clone(),
    })
}

pub struct DiscLoss<T> {
    /// Non-saturating adversarial discriminator loss (real + fake terms).
    pub adv: f64,
    /// R1 penalty value, 0.5/n * ||grad_x D(x_real)||^2.
    pub r1: f64,
    pub grads: BTreeMap<String, NArray<T>>,
}

/// Discriminator update for one task: non-saturating logistic loss plus an
/// R1 gradient penalty on real images. The penalty's parameter gradient is
/// an exact mixed second derivative, computed as a central-difference
/// Hessian-vector product along the (detached) input gradient, which avoids
/// second-order graph support.
pub fn loss_discriminator<T: Real>(
    params: &ParamTree<T>,
    cfg: &NetConfig,
    real: &NArray<T>,
    real_labels: &[usize],
    fake: &NArray<T>,
    fake_labels: &[usize],
    task: Mode,
    r1_weight: f64,
) -> Result<DiscLoss<T>> {
    let n = real_labels.len() as f64;
    let tape = Tape::new();
    let ctx = NetCtx::new(&tape, params, cfg);
    let xr = tape.leaf(real.clone());
    let d_real = discriminate(&ctx, xr, real_labels, task)?;
    let d_fake = discriminate(&ctx, tape.leaf(fake.clone()), fake_labels, task)?;
    let adv = d_real
        .neg()
        .softplus()
        .mean_all()
        .add(d_fake.softplus().mean_all())?;
    let adv_grads_all = tape.backward(adv)?;
    let mut grads = tape.param_grads(&adv_grads_all);
    debug_assert!(grads.keys().all(|k| is_disc(k)));

    // Input gradient of the plain logit sum drives the R1 penalty.
    let logit_sum = d_real.sum_all();
    let sum_grads = tape.backward(logit_sum)?;
    let gx = sum_grads
        .of(xr)
        .cloned()
        .unwrap_or_else(|| NArray::zeros(real.shape()));
    let gnorm2: f64 = gx.data().iter().map(|v| v.to_f64() * v.to_f64()).sum();
    let r1_value = 0.5 * gnorm2 / n;

    if r1_weight > 0.0 && gnorm2 > 0.0 {
        let gmax = gx
            .data()
            .iter()
            .map(|v| v.to_f64().abs())
            .fold(0.0f64, f64::max);
        let eps = 1e-3 / (gmax + 1e-12);
        let side = |sign: f64| -> Result<BTreeMap<String, NArray<T>>> {
            let mut shifted = real.clone();
            for (s, g) in shifted.data_mut().iter_mut().zip(gx.data().iter()) {
                *s += T::from_f64(sign * eps * g.to_f64());
            }
            let tape = Tape::new();
            let ctx = NetCtx::new(&tape, params, cfg);
            let d = discriminate(&ctx, tape.leaf(shifted), real_labels, task)?;
            let g = tape.backward(d.sum_all())?;
            Ok(tape.param_grads(&g))
        };
        let plus = side(1.0)?;
        let minus = side(-1.0)?;
        // grad_theta R1 = (Jacobian^T g) / n; accumulate with weight.
        let scale = r1_weight / (2.0 * eps * n);
        for (name, p) in plus {
            let m = &minus[&name];
            let entry = grads
                .entry(name)
                .or_insert_with(|| NArray::zeros(p.shape()));
            for ((e, pv), mv) in entry
                .data_mut()
                .iter_mut()
                .zip(p.data().iter())
                .zip(m.data().iter())
            {
                *e += T::from_f64((pv.to_f64() - mv.to_f64()) * scale);
            }
        }
    }

    Ok(DiscLoss {
        adv: adv.item().to_f64(),
        r1: r1_value,
        grads,
    })
}
