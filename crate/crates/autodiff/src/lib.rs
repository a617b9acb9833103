//! Minimal reverse-mode automatic differentiation for the codec networks.
//!
//! This is deliberately not a general-purpose framework: it provides exactly
//! the kernel set the encoder/decoder/discriminator stacks and the entropy
//! model need (convolution, dense layers, resampling, instance statistics,
//! a handful of elementwise maps and reductions), each with an analytically
//! derived backward pass that is validated against central finite differences.
//!
//! Evaluation is define-by-run: operations record nodes on a [`Tape`], and
//! [`Tape::backward`] replays them in reverse. Forward passes on a frozen
//! [`ParamTree`] are pure and deterministic; parameter updates go through
//! [`adam_step`] which requires exclusive access to the tree.

mod error;
mod narray;
mod scalar;

pub mod adam;
pub mod gradcheck;
pub mod io;
pub mod kernels;
pub mod paramtree;
pub mod rng;
pub mod tape;

pub use adam::adam_step;
pub use error::{Error, Result};
pub use narray::NArray;
pub use paramtree::{Param, ParamTree};
pub use rng::{RngState, SeedStream};
pub use scalar::Real;
pub use tape::{Gradients, Tape, Var};
