use crate::error::{Error, Result};
use crate::narray::NArray;
use crate::scalar::Real;

/// Instance normalization: each (sample, channel) plane is shifted to zero
/// mean and scaled to unit variance (biased estimate, stabilized by `eps`).
///
/// Returns the normalized array and the per-plane inverse standard deviation
/// needed by the backward pass.
pub fn instance_norm_forward<T: Real>(x: &NArray<T>, eps: T) -> Result<(NArray<T>, Vec<T>)> {
    if x.rank() != 4 {
        return Err(Error::shape(format!(
            "instance norm expects rank 4 [n, c, h, w], got {:?}",
            x.shape()
        )));
    }
    if !(eps.to_f64() > 0.0) {
        return Err(Error::arg("instance norm eps must be > 0"));
    }
    let (n, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let plane = h * w;
    let inv_count = T::ONE / T::from_f64(plane as f64);
    let mut y = NArray::zeros(x.shape());
    let mut inv_std = vec![T::ZERO; n * c];
    for p in 0..n * c {
        let src = &x.data()[p * plane..(p + 1) * plane];
        let mut mean = T::ZERO;
        for v in src {
            mean += *v;
        }
        mean *= inv_count;
        let mut var = T::ZERO;
        for v in src {
            let d = *v - mean;
            var += d * d;
        }
        var *= inv_count;
        let inv = T::ONE / (var + eps).sqrt();
        inv_std[p] = inv;
        let dst = &mut y.data_mut()[p * plane..(p + 1) * plane];
        for (d, v) in dst.iter_mut().zip(src.iter()) {
            *d = (*v - mean) * inv;
        }
    }
    Ok((y, inv_std))
}

/// Backward of instance normalization given the normalized output and the
/// saved inverse standard deviations.
pub fn instance_norm_backward<T: Real>(
    y: &NArray<T>,
    inv_std: &[T],
    grad_out: &NArray<T>,
) -> Result<NArray<T>> {
    let (n, c, h, w) = (y.shape()[0], y.shape()[1], y.shape()[2], y.shape()[3]);
    let plane = h * w;
    debug_assert_eq!(inv_std.len(), n * c);
    let inv_count = T::ONE / T::from_f64(plane as f64);
    let mut dx = NArray::zeros(y.shape());
    for p in 0..n * c {
        let ys = &y.data()[p * plane..(p + 1) * plane];
        let gs = &grad_out.data()[p * plane..(p + 1) * plane];
        let mut mean_g = T::ZERO;
        let mut mean_gy = T::ZERO;
        for (g, yv) in gs.iter().zip(ys.iter()) {
            mean_g += *g;
            mean_gy += *g * *yv;
        }
        mean_g *= inv_count;
        mean_gy *= inv_count;
        let inv = inv_std[p];
        let dst = &mut dx.data_mut()[p * plane..(p + 1) * plane];
        for ((d, g), yv) in dst.iter_mut().zip(gs.iter()).zip(ys.iter()) {
            *d = inv * (*g - mean_g - *yv * mean_gy);
        }
    }
    Ok(dx)
}
