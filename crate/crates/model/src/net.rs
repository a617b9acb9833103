use std::cell::RefCell;
use std::collections::HashMap;

use autodiff::{ParamTree, Real, Tape, Var};

use crate::config::NetConfig;
use crate::Result;

/// Bundles a tape, the parameter tree, and the network configuration for one
/// forward/backward pass. Parameter nodes are inserted lazily and cached so
/// each parameter appears on the tape exactly once per graph.
pub struct NetCtx<'t, T: Real> {
    pub tape: &'t Tape<T>,
    pub params: &'t ParamTree<T>,
    pub config: &'t NetConfig,
    cache: RefCell<HashMap<String, usize>>,
    vars: RefCell<Vec<Var<'t, T>>>,
}

impl<'t, T: Real> NetCtx<'t, T> {
    pub fn new(tape: &'t Tape<T>, params: &'t ParamTree<T>, config: &'t NetConfig) -> Self {
        NetCtx {
            tape,
            params,
            config,
            cache: RefCell::new(HashMap::new()),
            vars: RefCell::new(Vec::new()),
        }
    }

    /// Fetch a parameter as a tape node, inserting it on first use.
    pub fn p(&self, name: &str) -> Result<Var<'t, T>> {
        if let Some(&slot) = self.cache.borrow().get(name) {
            return Ok(self.vars.borrow()[slot]);
        }
        let value = self.params.value(name)?;
        let var = self.tape.param(name, value)?;
        let mut vars = self.vars.borrow_mut();
        vars.push(var);
        self.cache.borrow_mut().insert(name.to_string(), vars.len() - 1);
        Ok(var)
    }

    /// Convolution layer `prefix/{w,b}` with bias.
    pub fn conv(
        &self,
        x: Var<'t, T>,
        prefix: &str,
        stride: usize,
        padding: usize,
    ) -> Result<Var<'t, T>> {
        let w = self.p(&format!("{prefix}/w"))?;
        let b = self.p(&format!("{prefix}/b"))?;
        Ok(x.conv2d(w, stride, padding)?.channel_bias(b)?)
    }

    /// Dense layer `prefix/{w,b}`.
    pub fn dense(&self, x: Var<'t, T>, prefix: &str) -> Result<Var<'t, T>> {
        let w = self.p(&format!("{prefix}/w"))?;
        let b = self.p(&format!("{prefix}/b"))?;
        Ok(x.linear(w, b)?)
    }

    pub fn lrelu(&self, x: Var<'t, T>) -> Var<'t, T> {
        x.leaky_relu(T::from_f64(self.config.leaky_slope))
    }
}
