use crate::error::{Error, Result};
use crate::narray::NArray;
use crate::scalar::Real;

fn check_linear_args<T: Real>(
    x: &NArray<T>,
    w: &NArray<T>,
    b: &NArray<T>,
) -> Result<(usize, usize, usize)> {
    if x.rank() != 2 {
        return Err(Error::shape(format!(
            "linear input must be rank 2 [n, d_in], got {:?}",
            x.shape()
        )));
    }
    if w.rank() != 2 {
        return Err(Error::shape(format!(
            "linear weight must be rank 2 [d_out, d_in], got {:?}",
            w.shape()
        )));
    }
    let (n, din) = (x.shape()[0], x.shape()[1]);
    let (dout, wdin) = (w.shape()[0], w.shape()[1]);
    if din != wdin {
        return Err(Error::shape(format!(
            "linear dimension mismatch: input has {din} columns, weight expects {wdin}"
        )));
    }
    if b.shape() != [dout] {
        return Err(Error::shape(format!(
            "linear bias must be [{dout}], got {:?}",
            b.shape()
        )));
    }
    Ok((n, din, dout))
}

/// y[n, d_out] = x[n, d_in] . w^T + b
pub fn linear_forward<T: Real>(
    x: &NArray<T>,
    w: &NArray<T>,
    b: &NArray<T>,
) -> Result<NArray<T>> {
    let (n, din, dout) = check_linear_args(x, w, b)?;
    let mut y = NArray::zeros(&[n, dout]);
    unsafe {
        T::gemm(
            n,
            din,
            dout,
            T::ONE,
            x.data().as_ptr(),
            din as isize,
            1,
            w.data().as_ptr(),
            1,
            din as isize,
            T::ZERO,
            y.data_mut().as_mut_ptr(),
            dout as isize,
            1,
        );
    }
    for row in 0..n {
        for (j, bj) in b.data().iter().enumerate() {
            y.data_mut()[row * dout + j] += *bj;
        }
    }
    Ok(y)
}

/// Gradients w.r.t. input, weight and bias.
pub fn linear_backward<T: Real>(
    x: &NArray<T>,
    w: &NArray<T>,
    grad_out: &NArray<T>,
) -> Result<(NArray<T>, NArray<T>, NArray<T>)> {
    let (n, din) = (x.shape()[0], x.shape()[1]);
    let dout = w.shape()[0];
    debug_assert_eq!(grad_out.shape(), &[n, dout]);

    let mut dx = NArray::zeros(&[n, din]);
    let mut dw = NArray::zeros(&[dout, din]);
    let mut db = NArray::zeros(&[dout]);
    unsafe {
        // dX = dY [n, dout] * W [dout, din]
        T::gemm(
            n,
            dout,
            din,
            T::ONE,
            grad_out.data().as_ptr(),
            dout as isize,
            1,
            w.data().as_ptr(),
            din as isize,
            1,
            T::ZERO,
            dx.data_mut().as_mut_ptr(),
            din as isize,
            1,
        );
        // dW = dY^T [dout, n] * X [n, din]
        T::gemm(
            dout,
            n,
            din,
            T::ONE,
            grad_out.data().as_ptr(),
            1,
            dout as isize,
            x.data().as_ptr(),
            din as isize,
            1,
            T::ZERO,
            dw.data_mut().as_mut_ptr(),
            din as isize,
            1,
        );
    }
    for row in 0..n {
        for j in 0..dout {
            db.data_mut()[j] += grad_out.data()[row * dout + j];
        }
    }
    Ok((dx, dw, db))
}
