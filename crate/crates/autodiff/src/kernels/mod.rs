//! Pure forward/backward kernel implementations.
//!
//! Every function here is a deterministic map from arrays to arrays with no
//! hidden state; the tape layer wires them together and owns gradient
//! accumulation. Backward passes are validated against central finite
//! differences in the gradient suite.

pub mod conv;
pub mod dense;
pub mod norm;
pub mod resample;

pub use conv::{conv2d_backward, conv2d_forward, conv2d_out_extent};
pub use dense::{linear_backward, linear_forward};
pub use norm::{instance_norm_backward, instance_norm_forward};
pub use resample::{downsample_backward, downsample_forward, upsample_backward, upsample_forward};
