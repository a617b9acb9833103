use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::narray::NArray;
use crate::paramtree::ParamTree;
use crate::scalar::Real;

/// One Adam update with bias correction, applied in place to every parameter
/// named in `grads`. Parameters without a gradient entry are left untouched,
/// which is what keeps generator and discriminator updates disjoint.
pub fn adam_step<T: Real>(
    params: &mut ParamTree<T>,
    grads: &BTreeMap<String, NArray<T>>,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> Result<()> {
    if !(0.0 <= beta1 && beta1 < 1.0) || !(0.0 <= beta2 && beta2 < 1.0) {
        return Err(Error::arg(format!(
            "adam betas must lie in [0, 1), got {beta1}, {beta2}"
        )));
    }
    for (name, grad) in grads {
        let param = params.get_mut(name)?;
        if grad.shape() != param.value.shape() {
            return Err(Error::shape(format!(
                "gradient for '{name}' has shape {:?}, parameter is {:?}",
                grad.shape(),
                param.value.shape()
            )));
        }
        param.step += 1;
        let t = param.step as i32;
        let b1 = T::from_f64(beta1);
        let b2 = T::from_f64(beta2);
        let one_m_b1 = T::from_f64(1.0 - beta1);
        let one_m_b2 = T::from_f64(1.0 - beta2);
        let corr1 = T::from_f64(1.0 - beta1.powi(t));
        let corr2 = T::from_f64(1.0 - beta2.powi(t));
        let lr_t = T::from_f64(lr);
        let eps_t = T::from_f64(eps);
        for ((v, m), (s, g)) in param
            .value
            .data_mut()
            .iter_mut()
            .zip(param.m1.data_mut().iter_mut())
            .zip(param.m2.data_mut().iter_mut().zip(grad.data().iter()))
        {
            *m = b1 * *m + one_m_b1 * *g;
            *s = b2 * *s + one_m_b2 * *g * *g;
            let m_hat = *m / corr1;
            let s_hat = *s / corr2;
            *v -= lr_t * m_hat / (s_hat.sqrt() + eps_t);
        }
    }
    Ok(())
}
