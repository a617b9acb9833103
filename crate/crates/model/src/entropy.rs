//! Mode-conditional entropy model.
//!
//! The content latent is scored under a zero-mean Gaussian convolved with a
//! unit-width box, with per-element scales decoded from the hyper latent.
//! The hyper latent is scored under a per-channel learned factorized prior;
//! the priors are the only mode-split parameters (one set for autoencoding,
//! one for translation). Scales are quantized onto a fixed logarithmic grid
//! when building coder tables so sender and receiver derive identical
//! tables from the same decoded hyper latent.

use autodiff::{NArray, ParamTree, Real, Var};
use coder::CdfTable;

use crate::config::NetConfig;
use crate::net::NetCtx;
use crate::types::Mode;
use crate::Result;

pub fn prior_root(mode: Mode) -> &'static str {
    match mode {
        Mode::Autoencode => "entropy/prior_a",
        Mode::Translate => "entropy/prior_t",
    }
}

/// Hyper encoder: two stride-2 convolutions, latent -> hyper latent.
pub fn hyper_encode<'t, T: Real>(ctx: &NetCtx<'t, T>, z: Var<'t, T>) -> Result<Var<'t, T>> {
    let h = ctx.lrelu(ctx.conv(z, "entropy/hyper_enc/c0", 2, 1)?);
    ctx.conv(h, "entropy/hyper_enc/c1", 2, 1)
}

/// Hyper decoder: nearest-neighbor upsampling mirror producing one positive
/// scale per latent element, floored at `sigma_min`.
pub fn hyper_decode_sigma<'t, T: Real>(ctx: &NetCtx<'t, T>, h: Var<'t, T>) -> Result<Var<'t, T>> {
    let up = h.upsample(2)?;
    let mid = ctx.lrelu(ctx.conv(up, "entropy/hyper_dec/c0", 1, 1)?);
    let up = mid.upsample(2)?;
    let raw = ctx.conv(up, "entropy/hyper_dec/c1", 1, 1)?;
    Ok(raw.softplus().add_scalar(T::from_f64(ctx.config.sigma_min)))
}

/// Monotone cumulative function of one prior channel, on tape.
/// Input and output are `[m, 1]` columns.
fn prior_cdf<'t, T: Real>(
    ctx: &NetCtx<'t, T>,
    x: Var<'t, T>,
    mode: Mode,
    channel: usize,
) -> Result<Var<'t, T>> {
    let root = prior_root(mode);
    let mut h = x;
    for layer in 0..3 {
        let prefix = format!("{root}/ch{channel}/l{layer}");
        let w = ctx.p(&format!("{prefix}/w"))?.softplus();
        let b = ctx.p(&format!("{prefix}/b"))?;
        let u = h.linear(w, b)?;
        if layer < 2 {
            let gate = ctx.p(&format!("{prefix}/a"))?.tanh();
            h = u.add(u.tanh().row_mul(gate)?)?;
        } else {
            h = u.sigmoid();
        }
    }
    Ok(h)
}

/// Per-element bin probabilities of the hyper latent under its mode's
/// factorized prior: `c(v + 0.5) - c(v - 0.5)`, floored.
pub fn hyper_likelihood<'t, T: Real>(
    ctx: &NetCtx<'t, T>,
    h: Var<'t, T>,
    mode: Mode,
) -> Result<Var<'t, T>> {
    let shape = h.shape();
    let (n, c, sh, sw) = (shape[0], shape[1], shape[2], shape[3]);
    let plane = sh * sw;
    let flat = h.reshape(&[n, c * plane])?;
    let half = T::from_f64(0.5);
    let floor = T::from_f64(ctx.config.prob_floor);
    let mut per_channel: Vec<Var<'t, T>> = Vec::with_capacity(c);
    for ch in 0..c {
        let col = flat
            .slice_cols(ch * plane, plane)?
            .reshape(&[n * plane, 1])?;
        let upper = prior_cdf(ctx, col.add_scalar(half), mode, ch)?;
        let lower = prior_cdf(ctx, col.add_scalar(-half), mode, ch)?;
        let p = upper.sub(lower)?.clamp_min(floor);
        per_channel.push(p.reshape(&[n, plane])?);
    }
    let mut joined = per_channel[0];
    for p in &per_channel[1..] {
        joined = joined.concat_cols(*p)?;
    }
    // Rows are per-sample, columns grouped by channel; order only matters
    // for reductions, which are order-insensitive sums.
    Ok(joined.reshape(&[n, c, sh, sw])?)
}

/// Per-element bin probabilities of the content latent under the
/// scale-conditioned Gaussian, floored.
pub fn latent_likelihood<'t, T: Real>(
    ctx: &NetCtx<'t, T>,
    z: Var<'t, T>,
    sigma: Var<'t, T>,
) -> Result<Var<'t, T>> {
    Ok(z
        .gaussian_box_prob(sigma)?
        .clamp_min(T::from_f64(ctx.config.prob_floor)))
}

/// Differentiable rate path used during training: noise-quantize latent and
/// hyper latent, decode scales from the noisy hyper latent, and sum the
/// information content of both under the mode's model.
pub struct RatePath<'t, T: Real> {
    pub z_noisy: Var<'t, T>,
    pub h_noisy: Var<'t, T>,
    pub sigma: Var<'t, T>,
    /// Total bits of the whole batch (content + hyper).
    pub total_bits: Var<'t, T>,
}

pub fn noisy_rate_path<'t, T: Real>(
    ctx: &NetCtx<'t, T>,
    z: Var<'t, T>,
    noise_z: NArray<T>,
    noise_h: NArray<T>,
    mode: Mode,
) -> Result<RatePath<'t, T>> {
    let h = hyper_encode(ctx, z)?;
    let h_noisy = h.add(ctx.tape.leaf(noise_h))?;
    let sigma = hyper_decode_sigma(ctx, h_noisy)?;
    let z_noisy = z.add(ctx.tape.leaf(noise_z))?;
    let p_z = latent_likelihood(ctx, z_noisy, sigma)?;
    let p_h = hyper_likelihood(ctx, h_noisy, mode)?;
    let ln2_inv = T::from_f64(1.0 / std::f64::consts::LN_2);
    let bits_z = p_z.ln().sum_all().neg().scale(ln2_inv);
    let bits_h = p_h.ln().sum_all().neg().scale(ln2_inv);
    let total_bits = bits_z.add(bits_h)?;
    Ok(RatePath {
        z_noisy,
        h_noisy,
        sigma,
        total_bits,
    })
}

// ---- inference-side (pure f64, no tape) --------------------------------

fn softplus_f64(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn norm_cdf_f64(t: f64) -> f64 {
    // Same CDF implementation that backs the tape kernel.
    <f64 as Real>::norm_cdf(t)
}

/// Gaussian bin probability at integer v under scale sigma.
pub fn gaussian_bin_prob_f64(v: f64, sigma: f64) -> f64 {
    norm_cdf_f64((v + 0.5) / sigma) - norm_cdf_f64((v - 0.5) / sigma)
}

/// Factorized prior CDF evaluated outside the tape, in double precision.
/// Deterministic given the parameter values, so both sides of the channel
/// derive identical tables.
pub fn prior_cdf_f64<T: Real>(
    params: &ParamTree<T>,
    mode: Mode,
    channel: usize,
    x: f64,
) -> Result<f64> {
    let root = prior_root(mode);
    let mut h = vec![x];
    for layer in 0..3 {
        let prefix = format!("{root}/ch{channel}/l{layer}");
        let w = params.value(&format!("{prefix}/w"))?;
        let b = params.value(&format!("{prefix}/b"))?;
        let dout = w.shape()[0];
        let din = w.shape()[1];
        debug_assert_eq!(din, h.len());
        let mut u = vec![0.0f64; dout];
        for o in 0..dout {
            let mut acc = b.data()[o].to_f64();
            for i in 0..din {
                acc += softplus_f64(w.data()[o * din + i].to_f64()) * h[i];
            }
            u[o] = acc;
        }
        if layer < 2 {
            let a = params.value(&format!("{prefix}/a"))?;
            for (o, uo) in u.iter_mut().enumerate() {
                let gate = a.data()[o].to_f64().tanh();
                *uo += gate * uo.tanh();
            }
            h = u;
        } else {
            h = vec![1.0 / (1.0 + (-u[0]).exp())];
        }
    }
    Ok(h[0])
}

/// The fixed logarithmic scale grid shared by encoder and decoder.
pub fn sigma_grid(cfg: &NetConfig) -> Vec<f64> {
    let levels = cfg.sigma_grid_levels;
    let span = levels as f64;
    (0..levels)
        .map(|k| cfg.sigma_min * span.powf(k as f64 / (levels - 1) as f64))
        .collect()
}

/// Nearest grid level for a continuous scale, in log space.
pub fn sigma_grid_index(cfg: &NetConfig, sigma: f64) -> usize {
    let levels = cfg.sigma_grid_levels;
    let span = (levels as f64).ln();
    let t = (sigma.max(cfg.sigma_min) / cfg.sigma_min).ln() / span;
    let idx = (t * (levels - 1) as f64).round();
    (idx.max(0.0) as usize).min(levels - 1)
}

/// Symbol alphabet mapping: values in [-bound, bound] map to contiguous
/// symbols, everything else to the trailing escape symbol plus a raw 16-bit
/// value coded as two bytes.
pub fn escape_symbol(bound: i32) -> u32 {
    (2 * bound + 1) as u32
}

pub fn value_to_symbol(v: i32, bound: i32) -> u32 {
    if v.abs() <= bound {
        (v + bound) as u32
    } else {
        escape_symbol(bound)
    }
}

pub fn symbol_to_value(sym: u32, bound: i32) -> i32 {
    sym as i32 - bound
}

/// Deterministic coder tables for one mode of a checkpoint.
pub struct CodecTables {
    /// One table per scale grid level for the content latent.
    pub z_tables: Vec<CdfTable>,
    /// One table per hyper channel.
    pub h_tables: Vec<CdfTable>,
    /// Uniform byte table for escape-coded raw values.
    pub byte_table: CdfTable,
}

impl CodecTables {
    pub fn build<T: Real>(params: &ParamTree<T>, cfg: &NetConfig, mode: Mode) -> Result<Self> {
        let zb = cfg.latent_symbol_bound;
        let floor = cfg.prob_floor;
        let z_tables = sigma_grid(cfg)
            .iter()
            .map(|&sigma| {
                let mut weights: Vec<f64> = (-zb..=zb)
                    .map(|v| gaussian_bin_prob_f64(v as f64, sigma).max(floor))
                    .collect();
                let covered: f64 = weights.iter().sum();
                weights.push((1.0 - covered).max(floor));
                CdfTable::from_weights(&weights)
            })
            .collect::<coder::Result<Vec<_>>>()?;

        let hb = cfg.hyper_symbol_bound;
        let mut h_tables = Vec::with_capacity(cfg.hyper_channels);
        for c in 0..cfg.hyper_channels {
            let edges: Vec<f64> = (-hb - 1..=hb)
                .map(|v| prior_cdf_f64(params, mode, c, v as f64 + 0.5))
                .collect::<Result<Vec<_>>>()?;
            let mut weights: Vec<f64> = edges
                .windows(2)
                .map(|w| (w[1] - w[0]).max(floor))
                .collect();
            let tail = edges[0] + (1.0 - edges[edges.len() - 1]);
            weights.push(tail.max(floor));
            h_tables.push(CdfTable::from_weights(&weights)?);
        }

        Ok(CodecTables {
            z_tables,
            h_tables,
            byte_table: CdfTable::uniform(256)?,
        })
    }
}
