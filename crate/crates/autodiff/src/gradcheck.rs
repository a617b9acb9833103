//! Central-difference gradient checking.
//!
//! Used by the per-kernel unit tests and by the acceptance gradient suite.
//! The checker evaluates a scalar-valued graph builder twice per probe with
//! one input element nudged by ±step and compares the numeric slope with the
//! analytic gradient from the reverse pass.

use crate::error::Result;
use crate::narray::NArray;
use crate::rng::SeedStream;
use crate::tape::{Tape, Var};

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_TOL: f64 = 1e-4;

/// Worst probe observed by [`check_gradients`].
#[derive(Debug, Clone, Copy)]
pub struct ProbeReport {
    pub max_rel_err: f64,
    pub probes: usize,
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-6);
    (analytic - numeric).abs() / denom
}

/// Probe `probes` random elements across all `inputs` of a scalar function
/// built by `f`, at 64-bit precision. Returns the worst relative error.
pub fn check_gradients<F>(
    inputs: &[NArray<f64>],
    probes: usize,
    step: f64,
    rng: &mut SeedStream,
    f: F,
) -> Result<ProbeReport>
where
    F: for<'t> Fn(&'t Tape<f64>, &[Var<'t, f64>]) -> Result<Var<'t, f64>>,
{
    // Analytic gradients once.
    let tape = Tape::<f64>::new();
    let vars: Vec<Var<'_, f64>> = inputs.iter().map(|a| tape.leaf(a.clone())).collect();
    let root = f(&tape, &vars)?;
    let grads = tape.backward(root)?;
    let analytic: Vec<NArray<f64>> = vars
        .iter()
        .zip(inputs.iter())
        .map(|(v, a)| {
            grads
                .of(*v)
                .cloned()
                .unwrap_or_else(|| NArray::zeros(a.shape()))
        })
        .collect();

    let eval = |inputs: &[NArray<f64>]| -> Result<f64> {
        let tape = Tape::<f64>::new();
        let vars: Vec<Var<'_, f64>> = inputs.iter().map(|a| tape.leaf(a.clone())).collect();
        Ok(f(&tape, &vars)?.item())
    };

    let total_elems: usize = inputs.iter().map(|a| a.len()).sum();
    let mut worst = 0.0f64;
    let mut work: Vec<NArray<f64>> = inputs.to_vec();
    for _ in 0..probes {
        let mut flat = rng.uniform_usize(total_elems);
        let mut which = 0;
        while flat >= work[which].len() {
            flat -= work[which].len();
            which += 1;
        }
        let orig = work[which].data()[flat];
        work[which].data_mut()[flat] = orig + step;
        let up = eval(&work)?;
        work[which].data_mut()[flat] = orig - step;
        let down = eval(&work)?;
        work[which].data_mut()[flat] = orig;
        let numeric = (up - down) / (2.0 * step);
        let a = analytic[which].data()[flat];
        worst = worst.max(rel_err(a, numeric));
    }
    Ok(ProbeReport {
        max_rel_err: worst,
        probes,
    })
}

type Builder = Box<dyn for<'t> Fn(&'t Tape<f64>, &[Var<'t, f64>]) -> Result<Var<'t, f64>>>;

/// One named kernel check: inputs plus a scalar-valued graph builder.
pub struct KernelCheck {
    pub name: &'static str,
    pub inputs: Vec<NArray<f64>>,
    pub builder: Builder,
}

impl KernelCheck {
    pub fn run(&self, probes: usize, rng: &mut SeedStream) -> Result<ProbeReport> {
        check_gradients(&self.inputs, probes, DEFAULT_STEP, rng, &self.builder)
    }
}

/// Random values bounded away from zero, for kernels with a kink there.
fn away_from_zero(rng: &mut SeedStream, shape: &[usize], lo: f64, hi: f64) -> NArray<f64> {
    let mut a = NArray::<f64>::zeros(shape);
    for v in a.data_mut() {
        let sign = if rng.uniform_f64(0.0, 1.0) < 0.5 { -1.0 } else { 1.0 };
        *v = sign * rng.uniform_f64(lo, hi);
    }
    a
}

/// Collapse an arbitrary output to a scalar with fixed pseudo-random
/// weights so gradient structure is exercised, without adding kinks.
fn collapse<'t>(y: Var<'t, f64>) -> Result<Var<'t, f64>> {
    let shape = y.shape();
    let n: usize = shape.iter().product();
    let mut w = NArray::<f64>::zeros(&shape);
    for (i, v) in w.data_mut().iter_mut().enumerate() {
        *v = 0.25 + 0.7 * ((i * 2654435761) % 1000) as f64 / 1000.0;
    }
    debug_assert_eq!(w.len(), n);
    let wv = y.tape_leaf(w);
    Ok(y.mul(wv)?.sum_all())
}

/// The complete differentiable-kernel checklist. Every kernel exposed by the
/// tape appears here; the gradient suites iterate this list.
pub fn kernel_checks(rng: &mut SeedStream) -> Vec<KernelCheck> {
    let mut checks: Vec<KernelCheck> = Vec::new();

    let x_img = rng.uniform_array::<f64>(&[2, 5, 5], -1.0, 1.0);
    let k_conv = rng.uniform_array::<f64>(&[3, 2, 3, 3], -0.7, 0.7);
    checks.push(KernelCheck {
        name: "conv2d",
        inputs: vec![x_img.clone(), k_conv.clone()],
        builder: Box::new(|_t, v| collapse(v[0].conv2d(v[1], 1, 0)?)),
    });
    checks.push(KernelCheck {
        name: "conv2d_strided_padded",
        inputs: vec![rng.uniform_array::<f64>(&[1, 2, 6, 6], -1.0, 1.0), k_conv.clone()],
        builder: Box::new(|_t, v| collapse(v[0].conv2d(v[1], 2, 1)?)),
    });
    checks.push(KernelCheck {
        name: "linear",
        inputs: vec![
            rng.uniform_array::<f64>(&[3, 4], -1.0, 1.0),
            rng.uniform_array::<f64>(&[3, 4], -1.0, 1.0),
            rng.uniform_array::<f64>(&[3], -0.5, 0.5),
        ],
        builder: Box::new(|_t, v| collapse(v[0].linear(v[1], v[2])?)),
    });
    checks.push(KernelCheck {
        name: "upsample",
        inputs: vec![rng.uniform_array::<f64>(&[1, 2, 3, 3], -1.0, 1.0)],
        builder: Box::new(|_t, v| collapse(v[0].upsample(2)?)),
    });
    checks.push(KernelCheck {
        name: "downsample",
        inputs: vec![rng.uniform_array::<f64>(&[1, 2, 4, 4], -1.0, 1.0)],
        builder: Box::new(|_t, v| collapse(v[0].downsample(2)?)),
    });
    checks.push(KernelCheck {
        name: "instance_norm",
        inputs: vec![rng.uniform_array::<f64>(&[2, 3, 4, 4], -1.0, 1.0)],
        builder: Box::new(|_t, v| collapse(v[0].instance_norm(1e-5)?)),
    });
    checks.push(KernelCheck {
        name: "leaky_relu",
        inputs: vec![away_from_zero(rng, &[4, 5], 0.1, 1.0)],
        builder: Box::new(|_t, v| collapse(v[0].leaky_relu(0.2))),
    });
    checks.push(KernelCheck {
        name: "add",
        inputs: vec![
            rng.uniform_array::<f64>(&[3, 4], -1.0, 1.0),
            rng.uniform_array::<f64>(&[3, 4], -1.0, 1.0),
        ],
        builder: Box::new(|_t, v| collapse(v[0].add(v[1])?)),
    });
    checks.push(KernelCheck {
        name: "sub",
        inputs: vec![
            rng.uniform_array::<f64>(&[3, 4], -1.0, 1.0),
            rng.uniform_array::<f64>(&[3, 4], -1.0, 1.0),
        ],
        builder: Box::new(|_t, v| collapse(v[0].sub(v[1])?)),
    });
    checks.push(KernelCheck {
        name: "mul",
        inputs: vec![
            rng.uniform_array::<f64>(&[3, 4], -1.0, 1.0),
            rng.uniform_array::<f64>(&[3, 4], -1.0, 1.0),
        ],
        builder: Box::new(|_t, v| collapse(v[0].mul(v[1])?)),
    });
    checks.push(KernelCheck {
        name: "scale_and_shift",
        inputs: vec![rng.uniform_array::<f64>(&[3, 4], -1.0, 1.0)],
        builder: Box::new(|_t, v| collapse(v[0].scale(1.7).add_scalar(-0.3))),
    });
    checks.push(KernelCheck {
        name: "sigmoid",
        inputs: vec![rng.uniform_array::<f64>(&[3, 4], -2.0, 2.0)],
        builder: Box::new(|_t, v| collapse(v[0].sigmoid())),
    });
    checks.push(KernelCheck {
        name: "tanh",
        inputs: vec![rng.uniform_array::<f64>(&[3, 4], -2.0, 2.0)],
        builder: Box::new(|_t, v| collapse(v[0].tanh())),
    });
    checks.push(KernelCheck {
        name: "softplus",
        inputs: vec![rng.uniform_array::<f64>(&[3, 4], -3.0, 3.0)],
        builder: Box::new(|_t, v| collapse(v[0].softplus())),
    });
    checks.push(KernelCheck {
        name: "exp",
        inputs: vec![rng.uniform_array::<f64>(&[3, 4], -1.5, 1.5)],
        builder: Box::new(|_t, v| collapse(v[0].exp())),
    });
    checks.push(KernelCheck {
        name: "ln",
        inputs: vec![rng.uniform_array::<f64>(&[3, 4], 0.2, 3.0)],
        builder: Box::new(|_t, v| collapse(v[0].ln())),
    });
    checks.push(KernelCheck {
        name: "clamp_min",
        inputs: vec![away_from_zero(rng, &[3, 4], 0.1, 1.0)],
        builder: Box::new(|_t, v| collapse(v[0].clamp_min(0.0))),
    });
    checks.push(KernelCheck {
        name: "gaussian_box_prob",
        inputs: vec![
            rng.uniform_array::<f64>(&[3, 4], -2.0, 2.0),
            rng.uniform_array::<f64>(&[3, 4], 0.3, 2.0),
        ],
        builder: Box::new(|_t, v| collapse(v[0].gaussian_box_prob(v[1])?)),
    });
    checks.push(KernelCheck {
        name: "channel_affine",
        inputs: vec![
            rng.uniform_array::<f64>(&[2, 3, 4, 4], -1.0, 1.0),
            rng.uniform_array::<f64>(&[2, 3], 0.5, 1.5),
            rng.uniform_array::<f64>(&[2, 3], -0.5, 0.5),
        ],
        builder: Box::new(|_t, v| collapse(v[0].channel_affine(v[1], v[2])?)),
    });
    checks.push(KernelCheck {
        name: "channel_bias",
        inputs: vec![
            rng.uniform_array::<f64>(&[2, 3, 4, 4], -1.0, 1.0),
            rng.uniform_array::<f64>(&[3], -0.5, 0.5),
        ],
        builder: Box::new(|_t, v| collapse(v[0].channel_bias(v[1])?)),
    });
    checks.push(KernelCheck {
        name: "row_mul",
        inputs: vec![
            rng.uniform_array::<f64>(&[3, 4], -1.0, 1.0),
            rng.uniform_array::<f64>(&[4], 0.5, 1.5),
        ],
        builder: Box::new(|_t, v| collapse(v[0].row_mul(v[1])?)),
    });
    checks.push(KernelCheck {
        name: "row_add",
        inputs: vec![
            rng.uniform_array::<f64>(&[3, 4], -1.0, 1.0),
            rng.uniform_array::<f64>(&[4], -0.5, 0.5),
        ],
        builder: Box::new(|_t, v| collapse(v[0].row_add(v[1])?)),
    });
    checks.push(KernelCheck {
        name: "concat_cols",
        inputs: vec![
            rng.uniform_array::<f64>(&[3, 2], -1.0, 1.0),
            rng.uniform_array::<f64>(&[3, 4], -1.0, 1.0),
        ],
        builder: Box::new(|_t, v| collapse(v[0].concat_cols(v[1])?)),
    });
    checks.push(KernelCheck {
        name: "slice_cols",
        inputs: vec![rng.uniform_array::<f64>(&[3, 6], -1.0, 1.0)],
        builder: Box::new(|_t, v| collapse(v[0].slice_cols(1, 3)?)),
    });
    checks.push(KernelCheck {
        name: "pick_cols",
        inputs: vec![rng.uniform_array::<f64>(&[4, 3], -1.0, 1.0)],
        builder: Box::new(|_t, v| collapse(v[0].pick_cols(&[0, 2, 1, 2])?)),
    });
    checks.push(KernelCheck {
        name: "select_per_row",
        inputs: vec![
            rng.uniform_array::<f64>(&[3, 4], -1.0, 1.0),
            rng.uniform_array::<f64>(&[3, 4], -1.0, 1.0),
        ],
        builder: Box::new(|_t, v| {
            collapse(crate::tape::select_per_row(&[v[0], v[1]], &[1, 0, 1])?)
        }),
    });
    checks.push(KernelCheck {
        name: "mean_spatial",
        inputs: vec![rng.uniform_array::<f64>(&[2, 3, 4, 4], -1.0, 1.0)],
        builder: Box::new(|_t, v| collapse(v[0].mean_spatial()?)),
    });
    checks.push(KernelCheck {
        name: "reshape",
        inputs: vec![rng.uniform_array::<f64>(&[2, 3, 4], -1.0, 1.0)],
        builder: Box::new(|_t, v| collapse(v[0].reshape(&[6, 4])?)),
    });
    checks.push(KernelCheck {
        name: "sum_and_mean",
        inputs: vec![rng.uniform_array::<f64>(&[3, 4], -1.0, 1.0)],
        builder: Box::new(|_t, v| v[0].sum_all().scale(0.5).add(v[0].mean_all())),
    });
    {
        let a = rng.uniform_array::<f64>(&[3, 4], -1.0, 1.0);
        let mut b = a.clone();
        for v in b.data_mut() {
            *v += 0.3 + 0.5 * (*v).abs();
        }
        checks.push(KernelCheck {
            name: "l1_diff",
            inputs: vec![a, b],
            builder: Box::new(|_t, v| v[0].l1_diff(v[1])),
        });
    }
    checks.push(KernelCheck {
        name: "l2_diff",
        inputs: vec![
            rng.uniform_array::<f64>(&[3, 4], -1.0, 1.0),
            rng.uniform_array::<f64>(&[3, 4], -1.0, 1.0),
        ],
        builder: Box::new(|_t, v| v[0].l2_diff(v[1])),
    });
    checks
}
