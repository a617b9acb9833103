use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::kernels;
use crate::narray::NArray;
use crate::scalar::Real;

type BackFn<T> = Box<dyn Fn(&NArray<T>, &mut dyn FnMut(usize, NArray<T>))>;

struct Node<T: Real> {
    value: Rc<NArray<T>>,
    back: Option<BackFn<T>>,
}

/// Recorded computation graph. Operations append nodes; [`Tape::backward`]
/// replays them in reverse index order, which is a valid topological order by
/// construction. Accumulation order is fixed, so gradients are deterministic.
pub struct Tape<T: Real> {
    nodes: RefCell<Vec<Node<T>>>,
    params: RefCell<BTreeMap<String, usize>>,
}

/// Handle to a node on a tape.
#[derive(Clone, Copy)]
pub struct Var<'t, T: Real> {
    tape: &'t Tape<T>,
    idx: usize,
}

/// Per-node gradients produced by a backward pass. Gradients of interior
/// nodes are consumed during the sweep; leaf gradients (inputs, parameters)
/// are retained.
pub struct Gradients<T: Real> {
    grads: Vec<Option<NArray<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn of(&self, var: Var<'_, T>) -> Option<&NArray<T>> {
        self.grads.get(var.idx).and_then(|g| g.as_ref())
    }
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
            params: RefCell::new(BTreeMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: NArray<T>, back: Option<BackFn<T>>) -> Var<'_, T> {
        self.push_rc(Rc::new(value), back)
    }

    fn push_rc(&self, value: Rc<NArray<T>>, back: Option<BackFn<T>>) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, back });
        Var {
            tape: self,
            idx: nodes.len() - 1,
        }
    }

    /// Insert a constant/input leaf. Its gradient is retained by backward.
    pub fn leaf(&self, value: NArray<T>) -> Var<'_, T> {
        self.push(value, None)
    }

    pub fn leaf_rc(&self, value: Rc<NArray<T>>) -> Var<'_, T> {
        self.push_rc(value, None)
    }

    /// Insert a named parameter leaf. Names must be unique per tape.
    pub fn param(&self, name: &str, value: &NArray<T>) -> Result<Var<'_, T>> {
        let var = self.push(value.clone(), None);
        let prev = self.params.borrow_mut().insert(name.to_string(), var.idx);
        if prev.is_some() {
            return Err(Error::arg(format!("duplicate parameter node '{name}'")));
        }
        Ok(var)
    }

    /// Reverse sweep from a scalar root.
    pub fn backward(&self, root: Var<'_, T>) -> Result<Gradients<T>> {
        let nodes = self.nodes.borrow();
        if nodes[root.idx].value.len() != 1 {
            return Err(Error::shape(format!(
                "backward root must be scalar, got {:?}",
                nodes[root.idx].value.shape()
            )));
        }
        let mut grads: Vec<Option<NArray<T>>> = vec![None; nodes.len()];
        grads[root.idx] = Some(NArray::scalar(T::ONE));
        for i in (0..=root.idx).rev() {
            if nodes[i].back.is_none() {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let back = nodes[i].back.as_ref().unwrap();
            let mut sink = |p: usize, contrib: NArray<T>| {
                debug_assert!(p < i, "gradient flowing forward in the tape");
                match &mut grads[p] {
                    Some(acc) => acc.add_in_place(&contrib),
                    slot => *slot = Some(contrib),
                }
            };
            back(&g, &mut sink);
        }
        Ok(Gradients { grads })
    }

    /// Names of all parameters registered on this tape.
    pub fn param_names(&self) -> Vec<String> {
        self.params.borrow().keys().cloned().collect()
    }

    /// Gradients of all named parameters that participated in the graph.
    pub fn param_grads(&self, grads: &Gradients<T>) -> BTreeMap<String, NArray<T>> {
        let params = self.params.borrow();
        let mut out = BTreeMap::new();
        for (name, &idx) in params.iter() {
            if let Some(g) = grads.grads[idx].as_ref() {
                out.insert(name.clone(), g.clone());
            }
        }
        out
    }
}

fn promote_rank3<T: Real>(a: &NArray<T>) -> Option<Vec<usize>> {
    if a.rank() == 3 {
        Some(a.shape().to_vec())
    } else {
        None
    }
}

impl<'t, T: Real> Var<'t, T> {
    pub fn value(self) -> Rc<NArray<T>> {
        self.tape.nodes.borrow()[self.idx].value.clone()
    }

    pub fn shape(self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.idx].value.shape().to_vec()
    }

    pub fn item(self) -> T {
        self.value().item()
    }

    fn tape(self) -> &'t Tape<T> {
        self.tape
    }

    /// Re-enter the value as a fresh leaf, cutting gradient flow.
    pub fn detach(self) -> Var<'t, T> {
        let v = self.value();
        self.tape.leaf_rc(v)
    }

    /// Insert a constant leaf on the same tape as this variable.
    pub fn tape_leaf(self, value: NArray<T>) -> Var<'t, T> {
        self.tape.leaf(value)
    }

    // ---- structure ----------------------------------------------------

    /// 2-D convolution. Accepts rank-3 `[c, h, w]` (treated as a single
    /// sample) or rank-4 `[n, c, h, w]` input; kernel is `[co, ci, kh, kw]`.
    pub fn conv2d(self, kernel: Var<'t, T>, stride: usize, padding: usize) -> Result<Var<'t, T>> {
        let xv = self.value();
        let kv = kernel.value();
        let rank3 = promote_rank3(&xv);
        let x4 = match &rank3 {
            Some(s) => Rc::new(
                xv.as_ref()
                    .clone()
                    .reshaped(&[1, s[0], s[1], s[2]])
                    .expect("rank-3 promote"),
            ),
            None => xv.clone(),
        };
        let y = kernels::conv2d_forward(&x4, &kv, stride, padding)?;
        let y = match &rank3 {
            Some(_) => {
                let s = y.shape().to_vec();
                y.reshaped(&[s[1], s[2], s[3]])?
            }
            None => y,
        };
        let (xi, ki) = (self.idx, kernel.idx);
        let out_shape = y.shape().to_vec();
        let back: BackFn<T> = Box::new(move |g, sink| {
            let g4 = if rank3.is_some() {
                let mut s = vec![1];
                s.extend_from_slice(g.shape());
                g.clone().reshaped(&s).expect("grad promote")
            } else {
                g.clone()
            };
            debug_assert_eq!(g4.len(), out_shape.iter().product::<usize>());
            let (dx, dw) =
                kernels::conv2d_backward(&x4, &kv, &g4, stride, padding).expect("conv2d backward");
            let dx = match &rank3 {
                Some(s) => dx.reshaped(&[s[0], s[1], s[2]]).expect("rank-3 demote"),
                None => dx,
            };
            sink(xi, dx);
            sink(ki, dw);
        });
        Ok(self.tape().push(y, Some(back)))
    }

    /// Dense layer `y = x . w^T + b`. Accepts `[d_in]` or `[n, d_in]` input.
    pub fn linear(self, weight: Var<'t, T>, bias: Var<'t, T>) -> Result<Var<'t, T>> {
        let xv = self.value();
        let wv = weight.value();
        let bv = bias.value();
        let vector_in = xv.rank() == 1;
        let x2 = if vector_in {
            Rc::new(
                xv.as_ref()
                    .clone()
                    .reshaped(&[1, xv.len()])
                    .expect("vector promote"),
            )
        } else {
            xv.clone()
        };
        let y = kernels::linear_forward(&x2, &wv, &bv)?;
        let y = if vector_in {
            let d = y.shape()[1];
            y.reshaped(&[d])?
        } else {
            y
        };
        let (xi, wi, bi) = (self.idx, weight.idx, bias.idx);
        let back: BackFn<T> = Box::new(move |g, sink| {
            let g2 = if vector_in {
                g.clone().reshaped(&[1, g.len()]).expect("grad promote")
            } else {
                g.clone()
            };
            let (dx, dw, db) = kernels::linear_backward(&x2, &wv, &g2).expect("linear backward");
            let dx = if vector_in {
                let d = dx.shape()[1];
                dx.reshaped(&[d]).expect("vector demote")
            } else {
                dx
            };
            sink(xi, dx);
            sink(wi, dw);
            sink(bi, db);
        });
        Ok(self.tape().push(y, Some(back)))
    }

    /// Nearest-neighbor upsampling by an integer factor >= 2.
    pub fn upsample(self, factor: usize) -> Result<Var<'t, T>> {
        let xv = self.value();
        let rank3 = promote_rank3(&xv);
        let x4 = match &rank3 {
            Some(s) => Rc::new(
                xv.as_ref()
                    .clone()
                    .reshaped(&[1, s[0], s[1], s[2]])
                    .expect("rank-3 promote"),
            ),
            None => xv.clone(),
        };
        let y = kernels::upsample_forward(&x4, factor)?;
        let y = match &rank3 {
            Some(_) => {
                let s = y.shape().to_vec();
                y.reshaped(&[s[1], s[2], s[3]])?
            }
            None => y,
        };
        let xi = self.idx;
        let back: BackFn<T> = Box::new(move |g, sink| {
            let g4 = if rank3.is_some() {
                let mut s = vec![1];
                s.extend_from_slice(g.shape());
                g.clone().reshaped(&s).expect("grad promote")
            } else {
                g.clone()
            };
            let dx = kernels::upsample_backward(&g4, factor).expect("upsample backward");
            let dx = match &rank3 {
                Some(s) => dx.reshaped(&[s[0], s[1], s[2]]).expect("rank-3 demote"),
                None => dx,
            };
            sink(xi, dx);
        });
        Ok(self.tape().push(y, Some(back)))
    }

    /// Average pooling by an integer factor >= 2; extents must divide.
    pub fn downsample(self, factor: usize) -> Result<Var<'t, T>> {
        let xv = self.value();
        let rank3 = promote_rank3(&xv);
        let x4 = match &rank3 {
            Some(s) => Rc::new(
                xv.as_ref()
                    .clone()
                    .reshaped(&[1, s[0], s[1], s[2]])
                    .expect("rank-3 promote"),
            ),
            None => xv.clone(),
        };
        let y = kernels::downsample_forward(&x4, factor)?;
        let y = match &rank3 {
            Some(_) => {
                let s = y.shape().to_vec();
                y.reshaped(&[s[1], s[2], s[3]])?
            }
            None => y,
        };
        let xi = self.idx;
        let back: BackFn<T> = Box::new(move |g, sink| {
            let g4 = if rank3.is_some() {
                let mut s = vec![1];
                s.extend_from_slice(g.shape());
                g.clone().reshaped(&s).expect("grad promote")
            } else {
                g.clone()
            };
            let dx = kernels::downsample_backward(&g4, factor).expect("downsample backward");
            let dx = match &rank3 {
                Some(s) => dx.reshaped(&[s[0], s[1], s[2]]).expect("rank-3 demote"),
                None => dx,
            };
            sink(xi, dx);
        });
        Ok(self.tape().push(y, Some(back)))
    }

    /// Instance normalization over the spatial extent of each channel.
    pub fn instance_norm(self, eps: T) -> Result<Var<'t, T>> {
        let xv = self.value();
        let rank3 = promote_rank3(&xv);
        let x4 = match &rank3 {
            Some(s) => Rc::new(
                xv.as_ref()
                    .clone()
                    .reshaped(&[1, s[0], s[1], s[2]])
                    .expect("rank-3 promote"),
            ),
            None => xv.clone(),
        };
        let (y4, inv_std) = kernels::instance_norm_forward(&x4, eps)?;
        let y4 = Rc::new(y4);
        let y_out = match &rank3 {
            Some(s) => y4.as_ref().clone().reshaped(&[s[0], s[1], s[2]])?,
            None => y4.as_ref().clone(),
        };
        let xi = self.idx;
        let back: BackFn<T> = Box::new(move |g, sink| {
            let g4 = if rank3.is_some() {
                let mut s = vec![1];
                s.extend_from_slice(g.shape());
                g.clone().reshaped(&s).expect("grad promote")
            } else {
                g.clone()
            };
            let dx = kernels::instance_norm_backward(&y4, &inv_std, &g4)
                .expect("instance norm backward");
            let dx = match &rank3 {
                Some(s) => dx.reshaped(&[s[0], s[1], s[2]]).expect("rank-3 demote"),
                None => dx,
            };
            sink(xi, dx);
        });
        Ok(self.tape().push(y_out, Some(back)))
    }

    /// Zero-copy view with a new shape of equal element count.
    pub fn reshape(self, shape: &[usize]) -> Result<Var<'t, T>> {
        let xv = self.value();
        let y = xv.as_ref().clone().reshaped(shape)?;
        let xi = self.idx;
        let old_shape = xv.shape().to_vec();
        let back: BackFn<T> = Box::new(move |g, sink| {
            sink(xi, g.clone().reshaped(&old_shape).expect("reshape grad"));
        });
        Ok(self.tape().push(y, Some(back)))
    }

    /// Column-wise concatenation of two `[n, d]` matrices.
    pub fn concat_cols(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        let av = self.value();
        let bv = other.value();
        if av.rank() != 2 || bv.rank() != 2 || av.shape()[0] != bv.shape()[0] {
            return Err(Error::shape(format!(
                "concat_cols expects [n, d] pairs with equal n, got {:?} and {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        let (n, da, db) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
        let mut data = Vec::with_capacity(n * (da + db));
        for r in 0..n {
            data.extend_from_slice(&av.data()[r * da..(r + 1) * da]);
            data.extend_from_slice(&bv.data()[r * db..(r + 1) * db]);
        }
        let y = NArray::from_vec(&[n, da + db], data)?;
        let (ai, bi) = (self.idx, other.idx);
        let back: BackFn<T> = Box::new(move |g, sink| {
            let mut ga = NArray::zeros(&[n, da]);
            let mut gb = NArray::zeros(&[n, db]);
            for r in 0..n {
                let row = &g.data()[r * (da + db)..(r + 1) * (da + db)];
                ga.data_mut()[r * da..(r + 1) * da].copy_from_slice(&row[..da]);
                gb.data_mut()[r * db..(r + 1) * db].copy_from_slice(&row[da..]);
            }
            sink(ai, ga);
            sink(bi, gb);
        });
        Ok(self.tape().push(y, Some(back)))
    }

    /// Select `len` columns starting at `start` of an `[n, d]` matrix.
    pub fn slice_cols(self, start: usize, len: usize) -> Result<Var<'t, T>> {
        let xv = self.value();
        if xv.rank() != 2 || start + len > xv.shape()[1] {
            return Err(Error::shape(format!(
                "slice_cols({start}, {len}) out of range for {:?}",
                xv.shape()
            )));
        }
        let (n, d) = (xv.shape()[0], xv.shape()[1]);
        let mut data = Vec::with_capacity(n * len);
        for r in 0..n {
            data.extend_from_slice(&xv.data()[r * d + start..r * d + start + len]);
        }
        let y = NArray::from_vec(&[n, len], data)?;
        let xi = self.idx;
        let back: BackFn<T> = Box::new(move |g, sink| {
            let mut gx = NArray::zeros(&[n, d]);
            for r in 0..n {
                gx.data_mut()[r * d + start..r * d + start + len]
                    .copy_from_slice(&g.data()[r * len..(r + 1) * len]);
            }
            sink(xi, gx);
        });
        Ok(self.tape().push(y, Some(back)))
    }

    /// Pick one column per row of an `[n, k]` matrix, producing `[n, 1]`.
    pub fn pick_cols(self, idx: &[usize]) -> Result<Var<'t, T>> {
        let xv = self.value();
        if xv.rank() != 2 || xv.shape()[0] != idx.len() {
            return Err(Error::shape(format!(
                "pick_cols expects [n, k] with one index per row, got {:?} and {} indices",
                xv.shape(),
                idx.len()
            )));
        }
        let (n, k) = (xv.shape()[0], xv.shape()[1]);
        if let Some(bad) = idx.iter().find(|&&i| i >= k) {
            return Err(Error::arg(format!("column index {bad} out of range 0..{k}")));
        }
        let idx = idx.to_vec();
        let data: Vec<T> = (0..n).map(|r| xv.data()[r * k + idx[r]]).collect();
        let y = NArray::from_vec(&[n, 1], data)?;
        let xi = self.idx;
        let back: BackFn<T> = Box::new(move |g, sink| {
            let mut gx = NArray::zeros(&[n, k]);
            for r in 0..n {
                gx.data_mut()[r * k + idx[r]] = g.data()[r];
            }
            sink(xi, gx);
        });
        Ok(self.tape().push(y, Some(back)))
    }

    // ---- elementwise --------------------------------------------------

    fn unary(
        self,
        fwd: impl Fn(T) -> T,
        dydx: impl Fn(T, T) -> T + 'static,
    ) -> Var<'t, T> {
        let xv = self.value();
        let y = Rc::new(xv.map(fwd));
        let yc = y.clone();
        let xi = self.idx;
        let back: BackFn<T> = Box::new(move |g, sink| {
            let mut dx = g.clone();
            for ((d, &x), &yv) in dx
                .data_mut()
                .iter_mut()
                .zip(xv.data().iter())
                .zip(yc.data().iter())
            {
                *d *= dydx(x, yv);
            }
            sink(xi, dx);
        });
        self.tape().push_rc(y, Some(back))
    }

    fn binary(
        self,
        other: Var<'t, T>,
        fwd: impl Fn(T, T) -> T,
        da: impl Fn(T, T) -> T + 'static,
        db: impl Fn(T, T) -> T + 'static,
    ) -> Result<Var<'t, T>> {
        let av = self.value();
        let bv = other.value();
        let y = av.zip_map(&bv, fwd)?;
        let (ai, bi) = (self.idx, other.idx);
        let back: BackFn<T> = Box::new(move |g, sink| {
            let mut ga = g.clone();
            let mut gb = g.clone();
            for (((da_, db_), &a), &b) in ga
                .data_mut()
                .iter_mut()
                .zip(gb.data_mut().iter_mut())
                .zip(av.data().iter())
                .zip(bv.data().iter())
            {
                *da_ *= da(a, b);
                *db_ *= db(a, b);
            }
            sink(ai, ga);
            sink(bi, gb);
        });
        Ok(self.tape().push(y, Some(back)))
    }

    pub fn add(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        self.binary(other, |a, b| a + b, |_, _| T::ONE, |_, _| T::ONE)
    }

    pub fn sub(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        self.binary(other, |a, b| a - b, |_, _| T::ONE, |_, _| -T::ONE)
    }

    pub fn mul(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        self.binary(other, |a, b| a * b, |_, b| b, |a, _| a)
    }

    pub fn scale(self, c: T) -> Var<'t, T> {
        self.unary(move |x| x * c, move |_, _| c)
    }

    pub fn add_scalar(self, c: T) -> Var<'t, T> {
        self.unary(move |x| x + c, |_, _| T::ONE)
    }

    pub fn neg(self) -> Var<'t, T> {
        self.scale(-T::ONE)
    }

    pub fn leaky_relu(self, slope: T) -> Var<'t, T> {
        self.unary(
            move |x| if x > T::ZERO { x } else { x * slope },
            move |x, _| if x > T::ZERO { T::ONE } else { slope },
        )
    }

    pub fn sigmoid(self) -> Var<'t, T> {
        self.unary(|x| x.sigmoid(), |_, y| y * (T::ONE - y))
    }

    pub fn tanh(self) -> Var<'t, T> {
        self.unary(|x| x.tanh(), |_, y| T::ONE - y * y)
    }

    pub fn softplus(self) -> Var<'t, T> {
        self.unary(|x| x.softplus(), |x, _| x.sigmoid())
    }

    pub fn exp(self) -> Var<'t, T> {
        self.unary(|x| x.exp(), |_, y| y)
    }

    pub fn ln(self) -> Var<'t, T> {
        self.unary(|x| x.ln(), |x, _| T::ONE / x)
    }

    pub fn clamp_min(self, c: T) -> Var<'t, T> {
        self.unary(
            move |x| x.maxv(c),
            move |x, _| if x > c { T::ONE } else { T::ZERO },
        )
    }

    /// Probability that a unit-width bin centered on `self` captures a
    /// zero-mean Gaussian with per-element scale `sigma`:
    /// `phi((x + 0.5)/s) - phi((x - 0.5)/s)` with phi the standard normal CDF.
    pub fn gaussian_box_prob(self, sigma: Var<'t, T>) -> Result<Var<'t, T>> {
        let half = T::from_f64(0.5);
        self.binary(
            sigma,
            move |x, s| ((x + half) / s).norm_cdf() - ((x - half) / s).norm_cdf(),
            move |x, s| {
                let (a, b) = ((x + half) / s, (x - half) / s);
                (a.norm_pdf() - b.norm_pdf()) / s
            },
            move |x, s| {
                let (a, b) = ((x + half) / s, (x - half) / s);
                -(a.norm_pdf() * a - b.norm_pdf() * b) / s
            },
        )
    }

    // ---- broadcasting -------------------------------------------------

    /// Per-channel affine modulation of `[n, c, h, w]` features:
    /// `y = x * scale + shift` with `scale`/`shift` of shape `[n, c]`.
    pub fn channel_affine(self, scale: Var<'t, T>, shift: Var<'t, T>) -> Result<Var<'t, T>> {
        let xv = self.value();
        let sv = scale.value();
        let tv = shift.value();
        if xv.rank() != 4 {
            return Err(Error::shape(format!(
                "channel_affine expects rank-4 features, got {:?}",
                xv.shape()
            )));
        }
        let (n, c, h, w) = (xv.shape()[0], xv.shape()[1], xv.shape()[2], xv.shape()[3]);
        if sv.shape() != [n, c] || tv.shape() != [n, c] {
            return Err(Error::shape(format!(
                "channel_affine scale/shift must be [{n}, {c}], got {:?} and {:?}",
                sv.shape(),
                tv.shape()
            )));
        }
        let plane = h * w;
        let mut y = NArray::zeros(xv.shape());
        for p in 0..n * c {
            let (s, t) = (sv.data()[p], tv.data()[p]);
            for (d, &x) in y.data_mut()[p * plane..(p + 1) * plane]
                .iter_mut()
                .zip(xv.data()[p * plane..(p + 1) * plane].iter())
            {
                *d = x * s + t;
            }
        }
        let (xi, si, ti) = (self.idx, scale.idx, shift.idx);
        let back: BackFn<T> = Box::new(move |g, sink| {
            let mut dx = NArray::zeros(&[n, c, h, w]);
            let mut ds = NArray::zeros(&[n, c]);
            let mut dt = NArray::zeros(&[n, c]);
            for p in 0..n * c {
                let s = sv.data()[p];
                let gs = &g.data()[p * plane..(p + 1) * plane];
                let xs = &xv.data()[p * plane..(p + 1) * plane];
                let dxs = &mut dx.data_mut()[p * plane..(p + 1) * plane];
                let mut acc_s = T::ZERO;
                let mut acc_t = T::ZERO;
                for ((d, &gv), &x) in dxs.iter_mut().zip(gs.iter()).zip(xs.iter()) {
                    *d = gv * s;
                    acc_s += gv * x;
                    acc_t += gv;
                }
                ds.data_mut()[p] = acc_s;
                dt.data_mut()[p] = acc_t;
            }
            sink(xi, dx);
            sink(si, ds);
            sink(ti, dt);
        });
        Ok(self.tape().push(y, Some(back)))
    }

    /// Add a per-channel bias `[c]` to `[n, c, h, w]` features.
    pub fn channel_bias(self, bias: Var<'t, T>) -> Result<Var<'t, T>> {
        let xv = self.value();
        let bv = bias.value();
        if xv.rank() != 4 || bv.shape() != [xv.shape()[1]] {
            return Err(Error::shape(format!(
                "channel_bias expects [n, c, h, w] and [c], got {:?} and {:?}",
                xv.shape(),
                bv.shape()
            )));
        }
        let (n, c, h, w) = (xv.shape()[0], xv.shape()[1], xv.shape()[2], xv.shape()[3]);
        let plane = h * w;
        let mut y = xv.as_ref().clone();
        for s in 0..n {
            for ch in 0..c {
                let b = bv.data()[ch];
                for v in &mut y.data_mut()[(s * c + ch) * plane..(s * c + ch + 1) * plane] {
                    *v += b;
                }
            }
        }
        let (xi, bi) = (self.idx, bias.idx);
        let back: BackFn<T> = Box::new(move |g, sink| {
            let mut db = NArray::zeros(&[c]);
            for s in 0..n {
                for ch in 0..c {
                    let mut acc = T::ZERO;
                    for v in &g.data()[(s * c + ch) * plane..(s * c + ch + 1) * plane] {
                        acc += *v;
                    }
                    db.data_mut()[ch] += acc;
                }
            }
            sink(xi, g.clone());
            sink(bi, db);
        });
        Ok(self.tape().push(y, Some(back)))
    }

    /// Multiply each row of `[n, d]` by a `[d]` vector.
    pub fn row_mul(self, v: Var<'t, T>) -> Result<Var<'t, T>> {
        let xv = self.value();
        let vv = v.value();
        if xv.rank() != 2 || vv.shape() != [xv.shape()[1]] {
            return Err(Error::shape(format!(
                "row_mul expects [n, d] and [d], got {:?} and {:?}",
                xv.shape(),
                vv.shape()
            )));
        }
        let (n, d) = (xv.shape()[0], xv.shape()[1]);
        let mut y = NArray::zeros(&[n, d]);
        for r in 0..n {
            for j in 0..d {
                y.data_mut()[r * d + j] = xv.data()[r * d + j] * vv.data()[j];
            }
        }
        let (xi, vi) = (self.idx, v.idx);
        let back: BackFn<T> = Box::new(move |g, sink| {
            let mut dx = NArray::zeros(&[n, d]);
            let mut dv = NArray::zeros(&[d]);
            for r in 0..n {
                for j in 0..d {
                    let gv = g.data()[r * d + j];
                    dx.data_mut()[r * d + j] = gv * vv.data()[j];
                    dv.data_mut()[j] += gv * xv.data()[r * d + j];
                }
            }
            sink(xi, dx);
            sink(vi, dv);
        });
        Ok(self.tape().push(y, Some(back)))
    }

    /// Add a `[d]` vector to each row of `[n, d]`.
    pub fn row_add(self, v: Var<'t, T>) -> Result<Var<'t, T>> {
        let xv = self.value();
        let vv = v.value();
        if xv.rank() != 2 || vv.shape() != [xv.shape()[1]] {
            return Err(Error::shape(format!(
                "row_add expects [n, d] and [d], got {:?} and {:?}",
                xv.shape(),
                vv.shape()
            )));
        }
        let (n, d) = (xv.shape()[0], xv.shape()[1]);
        let mut y = xv.as_ref().clone();
        for r in 0..n {
            for j in 0..d {
                y.data_mut()[r * d + j] += vv.data()[j];
            }
        }
        let (xi, vi) = (self.idx, v.idx);
        let back: BackFn<T> = Box::new(move |g, sink| {
            let mut dv = NArray::zeros(&[d]);
            for r in 0..n {
                for j in 0..d {
                    dv.data_mut()[j] += g.data()[r * d + j];
                }
            }
            sink(xi, g.clone());
            sink(vi, dv);
        });
        Ok(self.tape().push(y, Some(back)))
    }

    // ---- reductions ---------------------------------------------------

    pub fn sum_all(self) -> Var<'t, T> {
        let xv = self.value();
        let mut acc = T::ZERO;
        for v in xv.data() {
            acc += *v;
        }
        let xi = self.idx;
        let back: BackFn<T> = Box::new(move |g, sink| {
            let gv = g.item();
            sink(xi, NArray::filled(xv.shape(), gv));
        });
        self.tape().push(NArray::scalar(acc), Some(back))
    }

    pub fn mean_all(self) -> Var<'t, T> {
        let n = self.value().len();
        self.sum_all().scale(T::ONE / T::from_f64(n as f64))
    }

    /// Global average pooling `[n, c, h, w] -> [n, c]`.
    pub fn mean_spatial(self) -> Result<Var<'t, T>> {
        let xv = self.value();
        if xv.rank() != 4 {
            return Err(Error::shape(format!(
                "mean_spatial expects rank 4, got {:?}",
                xv.shape()
            )));
        }
        let (n, c, h, w) = (xv.shape()[0], xv.shape()[1], xv.shape()[2], xv.shape()[3]);
        let plane = h * w;
        let inv = T::ONE / T::from_f64(plane as f64);
        let mut y = NArray::zeros(&[n, c]);
        for p in 0..n * c {
            let mut acc = T::ZERO;
            for v in &xv.data()[p * plane..(p + 1) * plane] {
                acc += *v;
            }
            y.data_mut()[p] = acc * inv;
        }
        let xi = self.idx;
        let back: BackFn<T> = Box::new(move |g, sink| {
            let mut dx = NArray::zeros(&[n, c, h, w]);
            for p in 0..n * c {
                let gv = g.data()[p] * inv;
                dx.data_mut()[p * plane..(p + 1) * plane].fill(gv);
            }
            sink(xi, dx);
        });
        Ok(self.tape().push(y, Some(back)))
    }

    /// Mean absolute difference over all elements.
    pub fn l1_diff(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        let av = self.value();
        let bv = other.value();
        if av.shape() != bv.shape() {
            return Err(Error::shape(format!(
                "l1_diff on {:?} vs {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        let inv = T::ONE / T::from_f64(av.len() as f64);
        let mut acc = T::ZERO;
        for (a, b) in av.data().iter().zip(bv.data().iter()) {
            acc += (*a - *b).abs();
        }
        let (ai, bi) = (self.idx, other.idx);
        let back: BackFn<T> = Box::new(move |g, sink| {
            let gv = g.item() * inv;
            let mut ga = NArray::zeros(av.shape());
            let mut gb = NArray::zeros(bv.shape());
            for ((da, db), (&a, &b)) in ga
                .data_mut()
                .iter_mut()
                .zip(gb.data_mut().iter_mut())
                .zip(av.data().iter().zip(bv.data().iter()))
            {
                let s = if a > b {
                    T::ONE
                } else if a < b {
                    -T::ONE
                } else {
                    T::ZERO
                };
                *da = gv * s;
                *db = -gv * s;
            }
            sink(ai, ga);
            sink(bi, gb);
        });
        Ok(self.tape().push(NArray::scalar(acc * inv), Some(back)))
    }

    /// Mean squared difference over all elements.
    pub fn l2_diff(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        let av = self.value();
        let bv = other.value();
        if av.shape() != bv.shape() {
            return Err(Error::shape(format!(
                "l2_diff on {:?} vs {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        let inv = T::ONE / T::from_f64(av.len() as f64);
        let mut acc = T::ZERO;
        for (a, b) in av.data().iter().zip(bv.data().iter()) {
            let d = *a - *b;
            acc += d * d;
        }
        let (ai, bi) = (self.idx, other.idx);
        let back: BackFn<T> = Box::new(move |g, sink| {
            let two = T::from_f64(2.0);
            let gv = g.item() * inv * two;
            let mut ga = NArray::zeros(av.shape());
            let mut gb = NArray::zeros(bv.shape());
            for ((da, db), (&a, &b)) in ga
                .data_mut()
                .iter_mut()
                .zip(gb.data_mut().iter_mut())
                .zip(av.data().iter().zip(bv.data().iter()))
            {
                let d = a - b;
                *da = gv * d;
                *db = -gv * d;
            }
            sink(ai, ga);
            sink(bi, gb);
        });
        Ok(self.tape().push(NArray::scalar(acc * inv), Some(back)))
    }
}

/// Gather one row per sample from a set of `[n, d]` head outputs:
/// `y[r] = heads[idx[r]][r]`. Used for per-domain output branches.
pub fn select_per_row<'t, T: Real>(
    heads: &[Var<'t, T>],
    idx: &[usize],
) -> Result<Var<'t, T>> {
    if heads.is_empty() {
        return Err(Error::arg("select_per_row needs at least one head"));
    }
    let tape = heads[0].tape;
    let shape = heads[0].shape();
    let (n, d) = (shape[0], shape[1]);
    for h in heads {
        if h.shape() != [n, d] {
            return Err(Error::shape("select_per_row heads differ in shape"));
        }
    }
    if idx.len() != n {
        return Err(Error::shape(format!(
            "select_per_row expects {n} indices, got {}",
            idx.len()
        )));
    }
    if let Some(bad) = idx.iter().find(|&&i| i >= heads.len()) {
        return Err(Error::arg(format!(
            "head index {bad} out of range 0..{}",
            heads.len()
        )));
    }
    let values: Vec<_> = heads.iter().map(|h| h.value()).collect();
    let parent_idx: Vec<usize> = heads.iter().map(|h| h.idx).collect();
    let idx = idx.to_vec();
    let mut y = NArray::zeros(&[n, d]);
    for r in 0..n {
        y.data_mut()[r * d..(r + 1) * d]
            .copy_from_slice(&values[idx[r]].data()[r * d..(r + 1) * d]);
    }
    let idx_b = idx.clone();
    let back: BackFn<T> = Box::new(move |g, sink| {
        for (k, &pi) in parent_idx.iter().enumerate() {
            let mut gk = NArray::zeros(&[n, d]);
            let mut any = false;
            for r in 0..n {
                if idx_b[r] == k {
                    gk.data_mut()[r * d..(r + 1) * d]
                        .copy_from_slice(&g.data()[r * d..(r + 1) * d]);
                    any = true;
                }
            }
            if any {
                sink(pi, gk);
            }
        }
    });
    Ok(tape.push(y, Some(back)))
}
