//! Tensors, reverse-mode autodiff, and the Adam optimizer.

mod adam;
pub(crate) mod kernels;
mod ops;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamState, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPSILON};
pub use ops::{cross_entropy_loss, layer_norm, softmax};
pub use tape::{Gradients, Tape, Var};
pub use tensor::{Real, Tensor};
