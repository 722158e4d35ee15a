//! Four-stage classification backbone, loss and training loop.

mod backbone;
mod config;
mod train;

pub use backbone::{Backbone, StageTrace};
pub use config::{scale_depth, scale_width, BackboneConfig, STAGES};
pub use train::{evaluate, predict, train, Clock, EpochStats, NoClock, TrainConfig, TrainReport};

use alloc::vec::Vec;

use crate::error::{shape_err, Result};
use crate::tensor::Matrix;
use crate::real::math;
use crate::Real;

/// Mean softmax cross-entropy over the rows of `logits` and its gradient.
pub fn softmax_cross_entropy<T: Real>(logits: &Matrix<T>, labels: &[usize]) -> Result<(f64, Matrix<T>)> {
    let (b, c) = logits.shape();
    if labels.len() != b {
        return Err(shape_err!("{} labels for {b} logit rows", labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(shape_err!("label {bad} out of range for {c} classes"));
    }
    let mut grad = Matrix::zeros(b, c);
    let mut loss = 0.0;
    let inv_b = T::one() / T::of(b as f64);
    for (i, &label) in labels.iter().enumerate() {
        let row = logits.row(i);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = row.iter().map(|&v| math::exp(v - max)).collect();
        let sum: T = exps.iter().copied().sum();
        loss += (math::ln(sum) - (row[label] - max)).as_f64();
        for (j, (g, e)) in grad.row_mut(i).iter_mut().zip(&exps).enumerate() {
            let onehot = if j == label { T::one() } else { T::zero() };
            *g = (*e / sum - onehot) * inv_b;
        }
    }
    Ok((loss / b as f64, grad))
}

/// Index of the largest logit in every row (first on ties).
pub fn argmax_rows<T: Real>(logits: &Matrix<T>) -> Vec<usize> {
    (0..logits.rows())
        .map(|i| {
            let row = logits.row(i);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
