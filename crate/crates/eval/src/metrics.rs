//! Image quality metrics. All inputs are `[c, h, w]` arrays in [0, 1].

use autodiff::NArray;

use crate::{EvalError, Result};

pub const PSNR_CAP_DB: f64 = 100.0;

fn check_pair(a: &NArray<f32>, b: &NArray<f32>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(EvalError::InvalidArgument(format!(
            "metric on mismatched shapes {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

pub fn mse(a: &NArray<f32>, b: &NArray<f32>) -> Result<f64> {
    check_pair(a, b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data().iter())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(sum / a.len() as f64)
}

/// Peak signal-to-noise ratio in dB against a unit dynamic range, capped for
/// identical inputs.
pub fn psnr(a: &NArray<f32>, b: &NArray<f32>) -> Result<f64> {
    let err = mse(a, b)?;
    if err <= 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / err).log10()).min(PSNR_CAP_DB))
}

fn gaussian_window(radius: usize, sigma: f64) -> Vec<f64> {
    let n = 2 * radius + 1;
    let mut w: Vec<f64> = (0..n)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = w.iter().sum();
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Separable valid-region Gaussian filter of one `[h, w]` plane.
fn blur_valid(plane: &[f64], h: usize, w: usize, win: &[f64]) -> (Vec<f64>, usize, usize) {
    let r = win.len() / 2;
    let wo = w - 2 * r;
    let mut rows = vec![0.0; h * wo];
    for y in 0..h {
        for x in 0..wo {
            let mut acc = 0.0;
            for (k, wk) in win.iter().enumerate() {
                acc += wk * plane[y * w + x + k];
            }
            rows[y * wo + x] = acc;
        }
    }
    let ho = h - 2 * r;
    let mut out = vec![0.0; ho * wo];
    for y in 0..ho {
        for x in 0..wo {
            let mut acc = 0.0;
            for (k, wk) in win.iter().enumerate() {
                acc += wk * rows[(y + k) * wo + x];
            }
            out[y * wo + x] = acc;
        }
    }
    (out, ho, wo)
}

fn downsample2(plane: &[f64], h: usize, w: usize) -> (Vec<f64>, usize, usize) {
    let (ho, wo) = (h / 2, w / 2);
    let mut out = vec![0.0; ho * wo];
    for y in 0..ho {
        for x in 0..wo {
            out[y * wo + x] = 0.25
                * (plane[2 * y * w + 2 * x]
                    + plane[2 * y * w + 2 * x + 1]
                    + plane[(2 * y + 1) * w + 2 * x]
                    + plane[(2 * y + 1) * w + 2 * x + 1]);
        }
    }
    (out, ho, wo)
}

struct SsimTerms {
    luminance_times_cs: f64,
    cs: f64,
}

fn ssim_terms(a: &[f64], b: &[f64], h: usize, w: usize, win: &[f64]) -> SsimTerms {
    const K1: f64 = 0.01;
    const K2: f64 = 0.03;
    let c1 = (K1 * 1.0f64).powi(2);
    let c2 = (K2 * 1.0f64).powi(2);

    let (mu_a, ho, wo) = blur_valid(a, h, w, win);
    let (mu_b, _, _) = blur_valid(b, h, w, win);
    let sq_a: Vec<f64> = a.iter().map(|v| v * v).collect();
    let sq_b: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| x * y).collect();
    let (m_sq_a, _, _) = blur_valid(&sq_a, h, w, win);
    let (m_sq_b, _, _) = blur_valid(&sq_b, h, w, win);
    let (m_ab, _, _) = blur_valid(&ab, h, w, win);

    let mut lum_cs = 0.0;
    let mut cs = 0.0;
    let n = (ho * wo) as f64;
    for i in 0..ho * wo {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = m_sq_a[i] - ma * ma;
        let vb = m_sq_b[i] - mb * mb;
        let cov = m_ab[i] - ma * mb;
        let l = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        let c = (2.0 * cov + c2) / (va + vb + c2);
        lum_cs += l * c;
        cs += c;
    }
    SsimTerms {
        luminance_times_cs: lum_cs / n,
        cs: cs / n,
    }
}

/// Multi-scale SSIM with the scale count adapted to the resolution (three
/// scales at 64x64) and the standard per-scale weights renormalized over the
/// scales used. Applied per channel and averaged.
pub fn msssim(a: &NArray<f32>, b: &NArray<f32>) -> Result<f64> {
    check_pair(a, b)?;
    if a.rank() != 3 {
        return Err(EvalError::InvalidArgument(format!(
            "msssim expects [c, h, w], got {:?}",
            a.shape()
        )));
    }
    const FULL_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
    let (c, h, w) = (a.shape()[0], a.shape()[1], a.shape()[2]);
    let win = gaussian_window(5, 1.5);
    // Each scale halves the extent; the coarsest must still fit the window.
    let mut scales = 0usize;
    let (mut sh, mut sw) = (h, w);
    while scales < 5 && sh.min(sw) >= win.len() + 2 {
        scales += 1;
        sh /= 2;
        sw /= 2;
    }
    if scales == 0 {
        return Err(EvalError::InvalidArgument(format!(
            "image {h}x{w} too small for the ssim window"
        )));
    }
    let wsum: f64 = FULL_WEIGHTS[..scales].iter().sum();
    let weights: Vec<f64> = FULL_WEIGHTS[..scales].iter().map(|v| v / wsum).collect();

    let plane_len = h * w;
    let mut score = 0.0;
    for ch in 0..c {
        let mut pa: Vec<f64> = a.data()[ch * plane_len..(ch + 1) * plane_len]
            .iter()
            .map(|&v| v as f64)
            .collect();
        let mut pb: Vec<f64> = b.data()[ch * plane_len..(ch + 1) * plane_len]
            .iter()
            .map(|&v| v as f64)
            .collect();
        let (mut sh, mut sw) = (h, w);
        let mut acc = 1.0f64;
        for (s, wgt) in weights.iter().enumerate() {
            let terms = ssim_terms(&pa, &pb, sh, sw, &win);
            let factor = if s + 1 == scales {
                terms.luminance_times_cs
            } else {
                terms.cs
            };
            acc *= factor.max(0.0).powf(*wgt);
            if s + 1 < scales {
                let (na, nh, nw) = downsample2(&pa, sh, sw);
                let (nb, _, _) = downsample2(&pb, sh, sw);
                pa = na;
                pb = nb;
                sh = nh;
                sw = nw;
            }
        }
        score += acc;
    }
    Ok(score / c as f64)
}

/// Mean pairwise mean-absolute-difference over a set of translations of one
/// input under different styles.
pub fn diversity_score(translations: &[NArray<f32>]) -> Result<f64> {
    if translations.len() < 2 {
        return Err(EvalError::InvalidArgument(format!(
            "diversity needs at least 2 translations, got {}",
            translations.len()
        )));
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..translations.len() {
        for j in i + 1..translations.len() {
            check_pair(&translations[i], &translations[j])?;
            let l1: f64 = translations[i]
                .data()
                .iter()
                .zip(translations[j].data().iter())
                .map(|(&x, &y)| (x as f64 - y as f64).abs())
                .sum();
            total += l1 / translations[i].len() as f64;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}
