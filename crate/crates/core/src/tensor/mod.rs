//! Dense matrices, point-wise MLP layers with batch normalization, and
//! per-layer reverse-mode gradients.
//!
//! Each layer records what its backward pass needs (its tape) during a
//! [`Mode::Train`] forward. `backward` consumes the tape, accumulates into the
//! parameter gradients and returns the input gradient. Calling it without a
//! recorded forward is an [`Error::Tape`](crate::Error::Tape).

mod layer;
mod matrix;
mod mlp;
mod norm;

pub use layer::{kaiming_uniform, Layer, Linear, Mode, Param, KAIMING_GAIN};
pub use matrix::{matmul, matmul_tn_acc, Matrix};
pub use mlp::{
    backward_stack, forward_stack, relu_backward, relu_in_place, Activation, MlpLayer, Sgd,
    SGD_MOMENTUM, SGD_WEIGHT_DECAY,
};
pub use norm::{BatchNorm, BN_EPS, BN_MOMENTUM};
