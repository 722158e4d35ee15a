use alloc::vec;
use alloc::vec::Vec;

use super::{Layer, Matrix, Mode, Param};
use crate::error::{shape_err, Error, Result};
use crate::Real;

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
struct BnTape<T> {
    x_hat: Matrix<T>,
    inv_std: Vec<T>,
}

/// Per-channel batch normalization over the row axis.
///
/// Training mode normalizes with the biased batch variance and folds the
/// unbiased variance into the running estimate:
/// `running = (1 - momentum) * running + momentum * batch`.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm<T = f32> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub momentum: T,
    pub eps: T,
    tape: Option<BnTape<T>>,
}

impl<T: Real> BatchNorm<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Param::new(Matrix::filled(1, channels, T::one())),
            beta: Param::new(Matrix::zeros(1, channels)),
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            momentum: T::of(BN_MOMENTUM),
            eps: T::of(BN_EPS),
            tape: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.running_mean.len()
    }

    pub fn forward(&mut self, input: &Matrix<T>, mode: Mode) -> Result<Matrix<T>> {
        let c = self.channels();
        if input.cols() != c {
            return Err(shape_err!("batch norm over {c} channels got {}", input.cols()));
        }
        let n = input.rows();
        let gamma = self.gamma.value.as_slice();
        let beta = self.beta.value.as_slice();
        match mode {
            Mode::Eval => {
                self.tape = None;
                let scale: Vec<T> = (0..c)
                    .map(|j| gamma[j] / (self.running_var[j] + self.eps).sqrt())
                    .collect();
                let mut out = input.clone();
                for r in 0..n {
                    for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                        *v = (*v - self.running_mean[j]) * scale[j] + beta[j];
                    }
                }
                Ok(out)
            }
            Mode::Train => {
                if n < 2 {
                    return Err(Error::DegenerateBatch(n));
                }
                let nf = T::of(n as f64);
                let mut mean = vec![T::zero(); c];
                for r in 0..n {
                    for (m, &v) in mean.iter_mut().zip(input.row(r)) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= nf);
                let mut var = vec![T::zero(); c];
                for r in 0..n {
                    for ((s, &v), &m) in var.iter_mut().zip(input.row(r)).zip(&mean) {
                        let d = v - m;
                        *s += d * d;
                    }
                }
                var.iter_mut().for_each(|s| *s /= nf);
                let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + self.eps).sqrt()).collect();

                let mut x_hat = Matrix::zeros(n, c);
                let mut out = Matrix::zeros(n, c);
                for r in 0..n {
                    let xr = input.row(r);
                    for j in 0..c {
                        let h = (xr[j] - mean[j]) * inv_std[j];
                        x_hat.set(r, j, h);
                        out.set(r, j, h * gamma[j] + beta[j]);
                    }
                }

                let unbias = nf / T::of((n - 1) as f64);
                let keep = T::one() - self.momentum;
                for j in 0..c {
                    self.running_mean[j] = keep * self.running_mean[j] + self.momentum * mean[j];
                    self.running_var[j] = keep * self.running_var[j] + self.momentum * var[j] * unbias;
                }
                self.tape = Some(BnTape { x_hat, inv_std });
                Ok(out)
            }
        }
    }

    pub fn backward(&mut self, upstream: &Matrix<T>) -> Result<Matrix<T>> {
        let BnTape { x_hat, inv_std } = self.tape.take().ok_or(Error::Tape("batch norm"))?;
        if upstream.shape() != x_hat.shape() {
            return Err(shape_err!("batch norm upstream {:?}", upstream.shape()));
        }
        let (n, c) = x_hat.shape();
        let nf = T::of(n as f64);
        let gamma = self.gamma.value.as_slice();

        let mut sum_dy = vec![T::zero(); c];
        let mut sum_dy_xhat = vec![T::zero(); c];
        for r in 0..n {
            for j in 0..c {
                let dy = upstream.get(r, j);
                sum_dy[j] += dy;
                sum_dy_xhat[j] += dy * x_hat.get(r, j);
            }
        }
        for j in 0..c {
            self.beta.grad.as_mut_slice()[j] += sum_dy[j];
            self.gamma.grad.as_mut_slice()[j] += sum_dy_xhat[j];
        }

        // dx = gamma * inv_std / n * (n*dy - sum(dy) - x_hat * sum(dy * x_hat))
        let mut dx = Matrix::zeros(n, c);
        for r in 0..n {
            for j in 0..c {
                let dy = upstream.get(r, j);
                let v = gamma[j] * inv_std[j] / nf
                    * (nf * dy - sum_dy[j] - x_hat.get(r, j) * sum_dy_xhat[j]);
                dx.set(r, j, v);
            }
        }
        Ok(dx)
    }
}

impl<T: Real> Layer<T> for BatchNorm<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.gamma);
        f(&mut self.beta);
    }

    fn visit_buffers(&mut self, f: &mut dyn FnMut(&mut Vec<T>)) {
        f(&mut self.running_mean);
        f(&mut self.running_var);
    }
}
