use crate::error::{Error, Result};
use crate::narray::NArray;
use crate::scalar::Real;

/// Output spatial extent of a convolution: floor((e + 2p - k)/s) + 1.
pub fn conv2d_out_extent(extent: usize, kernel: usize, stride: usize, padding: usize) -> usize {
    (extent + 2 * padding - kernel) / stride + 1
}

fn check_conv_args<T: Real>(
    x: &NArray<T>,
    w: &NArray<T>,
    stride: usize,
    padding: usize,
) -> Result<(usize, usize, usize, usize, usize, usize, usize)> {
    if stride == 0 {
        return Err(Error::arg("conv2d stride must be >= 1"));
    }
    if x.rank() != 4 {
        return Err(Error::shape(format!(
            "conv2d input must be rank 4 [n, c, h, w], got {:?}",
            x.shape()
        )));
    }
    if w.rank() != 4 {
        return Err(Error::shape(format!(
            "conv2d kernel must be rank 4 [co, ci, kh, kw], got {:?}",
            w.shape()
        )));
    }
    let (n, ci, h, wd) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (co, wci, kh, kw) = (w.shape()[0], w.shape()[1], w.shape()[2], w.shape()[3]);
    if ci != wci {
        return Err(Error::shape(format!(
            "conv2d channel mismatch: input has {ci}, kernel expects {wci}"
        )));
    }
    if h + 2 * padding < kh || wd + 2 * padding < kw {
        return Err(Error::shape(format!(
            "conv2d kernel {kh}x{kw} larger than padded input {}x{}",
            h + 2 * padding,
            wd + 2 * padding
        )));
    }
    Ok((n, ci, h, wd, co, kh, kw))
}

/// Gather the receptive fields of one sample into a `[ci*kh*kw, ho*wo]`
/// row-major matrix. Out-of-bounds taps read as zero.
#[allow(clippy::too_many_arguments)]
fn im2col<T: Real>(
    x: &[T],
    ci: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: usize,
    ho: usize,
    wo: usize,
    col: &mut [T],
) {
    for c in 0..ci {
        let plane = &x[c * h * w..(c + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = ((c * kh + ky) * kw + kx) * ho * wo;
                for oy in 0..ho {
                    let iy = (oy * stride + ky) as isize - padding as isize;
                    let dst = &mut col[row + oy * wo..row + (oy + 1) * wo];
                    if iy < 0 || iy >= h as isize {
                        dst.fill(T::ZERO);
                        continue;
                    }
                    let src_row = &plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * stride + kx) as isize - padding as isize;
                        *d = if ix < 0 || ix >= w as isize {
                            T::ZERO
                        } else {
                            src_row[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Scatter-add a `[ci*kh*kw, ho*wo]` gradient matrix back onto one sample.
#[allow(clippy::too_many_arguments)]
fn col2im_add<T: Real>(
    col: &[T],
    ci: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: usize,
    ho: usize,
    wo: usize,
    dx: &mut [T],
) {
    for c in 0..ci {
        let plane = &mut dx[c * h * w..(c + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = ((c * kh + ky) * kw + kx) * ho * wo;
                for oy in 0..ho {
                    let iy = (oy * stride + ky) as isize - padding as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src = &col[row + oy * wo..row + (oy + 1) * wo];
                    for (ox, s) in src.iter().enumerate() {
                        let ix = (ox * stride + kx) as isize - padding as isize;
                        if ix >= 0 && ix < w as isize {
                            plane[iy as usize * w + ix as usize] += *s;
                        }
                    }
                }
            }
        }
    }
}

/// 2-D cross-correlation of `[n, ci, h, w]` with `[co, ci, kh, kw]`.
pub fn conv2d_forward<T: Real>(
    x: &NArray<T>,
    w: &NArray<T>,
    stride: usize,
    padding: usize,
) -> Result<NArray<T>> {
    let (n, ci, h, wd, co, kh, kw) = check_conv_args(x, w, stride, padding)?;
    let ho = conv2d_out_extent(h, kh, stride, padding);
    let wo = conv2d_out_extent(wd, kw, stride, padding);
    let k = ci * kh * kw;
    let l = ho * wo;

    let mut y = NArray::zeros(&[n, co, ho, wo]);
    let mut col = vec![T::ZERO; k * l];
    for s in 0..n {
        im2col(
            &x.data()[s * ci * h * wd..(s + 1) * ci * h * wd],
            ci,
            h,
            wd,
            kh,
            kw,
            stride,
            padding,
            ho,
            wo,
            &mut col,
        );
        unsafe {
            T::gemm(
                co,
                k,
                l,
                T::ONE,
                w.data().as_ptr(),
                k as isize,
                1,
                col.as_ptr(),
                l as isize,
                1,
                T::ZERO,
                y.data_mut()[s * co * l..(s + 1) * co * l].as_mut_ptr(),
                l as isize,
                1,
            );
        }
    }
    Ok(y)
}

/// Gradients of a convolution w.r.t. its input and kernel.
pub fn conv2d_backward<T: Real>(
    x: &NArray<T>,
    w: &NArray<T>,
    grad_out: &NArray<T>,
    stride: usize,
    padding: usize,
) -> Result<(NArray<T>, NArray<T>)> {
    let (n, ci, h, wd, co, kh, kw) = check_conv_args(x, w, stride, padding)?;
    let ho = conv2d_out_extent(h, kh, stride, padding);
    let wo = conv2d_out_extent(wd, kw, stride, padding);
    let k = ci * kh * kw;
    let l = ho * wo;
    debug_assert_eq!(grad_out.shape(), &[n, co, ho, wo]);

    let mut dx = NArray::zeros(x.shape());
    let mut dw = NArray::zeros(w.shape());
    let mut col = vec![T::ZERO; k * l];
    let mut dcol = vec![T::ZERO; k * l];
    for s in 0..n {
        let xs = &x.data()[s * ci * h * wd..(s + 1) * ci * h * wd];
        let gs = &grad_out.data()[s * co * l..(s + 1) * co * l];
        im2col(xs, ci, h, wd, kh, kw, stride, padding, ho, wo, &mut col);
        unsafe {
            // dW += gs [co, l] * col^T [l, k]
            T::gemm(
                co,
                l,
                k,
                T::ONE,
                gs.as_ptr(),
                l as isize,
                1,
                col.as_ptr(),
                1,
                l as isize,
                T::ONE,
                dw.data_mut().as_mut_ptr(),
                k as isize,
                1,
            );
            // dcol [k, l] = W^T [k, co] * gs [co, l]
            T::gemm(
                k,
                co,
                l,
                T::ONE,
                w.data().as_ptr(),
                1,
                k as isize,
                gs.as_ptr(),
                l as isize,
                1,
                T::ZERO,
                dcol.as_mut_ptr(),
                l as isize,
                1,
            );
        }
        col2im_add(
            &dcol,
            ci,
            h,
            wd,
            kh,
            kw,
            stride,
            padding,
            ho,
            wo,
            &mut dx.data_mut()[s * ci * h * wd..(s + 1) * ci * h * wd],
        );
    }
    Ok((dx, dw))
}
