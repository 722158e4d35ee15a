//! Set-abstraction kernels for point-cloud networks.
//!
//! The crate is `no_std` (it needs `alloc`). It provides farthest point
//! sampling, grid-accelerated ball query, neighborhood grouping, isotropic and
//! anisotropic reductions, the four set-abstraction block variants (vanilla,
//! pre-conv, separable and anisotropic separable), a classification backbone
//! with a training loop, analytic FLOP counting, synthetic shape generation and
//! a binary checkpoint codec. Clocks and file IO live in the `assa` crate.
#![no_std]
// `!(x >= 0)` style guards are there to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
mod real;

pub mod checkpoint;
pub mod datagen;
pub mod geometry;
pub mod network;
pub mod profiler;
pub mod reduction;
pub mod sa;
pub mod tensor;

pub use error::{Error, Result};
pub use real::Real;
