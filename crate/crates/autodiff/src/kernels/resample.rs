use crate::error::{Error, Result};
use crate::narray::NArray;
use crate::scalar::Real;

fn check_rank4<T: Real>(x: &NArray<T>, what: &str) -> Result<(usize, usize, usize, usize)> {
    if x.rank() != 4 {
        return Err(Error::shape(format!(
            "{what} expects rank 4 [n, c, h, w], got {:?}",
            x.shape()
        )));
    }
    Ok((x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]))
}

/// Nearest-neighbor upsampling by an integer factor.
pub fn upsample_forward<T: Real>(x: &NArray<T>, factor: usize) -> Result<NArray<T>> {
    if factor < 2 {
        return Err(Error::arg("resample factor must be >= 2"));
    }
    let (n, c, h, w) = check_rank4(x, "upsample")?;
    let (ho, wo) = (h * factor, w * factor);
    let mut y = NArray::zeros(&[n, c, ho, wo]);
    for p in 0..n * c {
        let src = &x.data()[p * h * w..(p + 1) * h * w];
        let dst = &mut y.data_mut()[p * ho * wo..(p + 1) * ho * wo];
        for oy in 0..ho {
            let iy = oy / factor;
            for ox in 0..wo {
                dst[oy * wo + ox] = src[iy * w + ox / factor];
            }
        }
    }
    Ok(y)
}

/// Backward of nearest-neighbor upsampling: sum each factor x factor block.
pub fn upsample_backward<T: Real>(grad_out: &NArray<T>, factor: usize) -> Result<NArray<T>> {
    let (n, c, ho, wo) = check_rank4(grad_out, "upsample backward")?;
    let (h, w) = (ho / factor, wo / factor);
    let mut dx = NArray::zeros(&[n, c, h, w]);
    for p in 0..n * c {
        let src = &grad_out.data()[p * ho * wo..(p + 1) * ho * wo];
        let dst = &mut dx.data_mut()[p * h * w..(p + 1) * h * w];
        for oy in 0..ho {
            let iy = oy / factor;
            for ox in 0..wo {
                dst[iy * w + ox / factor] += src[oy * wo + ox];
            }
        }
    }
    Ok(dx)
}

/// Average pooling by an integer factor; extents must divide evenly.
pub fn downsample_forward<T: Real>(x: &NArray<T>, factor: usize) -> Result<NArray<T>> {
    if factor < 2 {
        return Err(Error::arg("resample factor must be >= 2"));
    }
    let (n, c, h, w) = check_rank4(x, "downsample")?;
    if h % factor != 0 || w % factor != 0 {
        return Err(Error::shape(format!(
            "downsample by {factor} needs divisible extents, got {h}x{w}"
        )));
    }
    let (ho, wo) = (h / factor, w / factor);
    let inv = T::ONE / T::from_f64((factor * factor) as f64);
    let mut y = NArray::zeros(&[n, c, ho, wo]);
    for p in 0..n * c {
        let src = &x.data()[p * h * w..(p + 1) * h * w];
        let dst = &mut y.data_mut()[p * ho * wo..(p + 1) * ho * wo];
        for oy in 0..ho {
            for ox in 0..wo {
                let mut acc = T::ZERO;
                for ky in 0..factor {
                    for kx in 0..factor {
                        acc += src[(oy * factor + ky) * w + ox * factor + kx];
                    }
                }
                dst[oy * wo + ox] = acc * inv;
            }
        }
    }
    Ok(y)
}

/// Backward of average pooling: spread each gradient evenly over its block.
pub fn downsample_backward<T: Real>(grad_out: &NArray<T>, factor: usize) -> Result<NArray<T>> {
    let (n, c, ho, wo) = check_rank4(grad_out, "downsample backward")?;
    let (h, w) = (ho * factor, wo * factor);
    let inv = T::ONE / T::from_f64((factor * factor) as f64);
    let mut dx = NArray::zeros(&[n, c, h, w]);
    for p in 0..n * c {
        let src = &grad_out.data()[p * ho * wo..(p + 1) * ho * wo];
        let dst = &mut dx.data_mut()[p * h * w..(p + 1) * h * w];
        for oy in 0..ho {
            for ox in 0..wo {
                let g = src[oy * wo + ox] * inv;
                for ky in 0..factor {
                    for kx in 0..factor {
                        dst[(oy * factor + ky) * w + ox * factor + kx] = g;
                    }
                }
            }
        }
    }
    Ok(dx)
}
