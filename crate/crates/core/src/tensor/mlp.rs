use alloc::vec::Vec;

use rand::Rng;

use super::{BatchNorm, Layer, Linear, Matrix, Mode, Param};
use crate::error::{shape_err, Error, Result};
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    None,
}

/// In-place ReLU; returns the mask of rows*cols entries that passed.
pub fn relu_in_place<T: Real>(m: &mut Matrix<T>) -> Vec<bool> {
    m.as_mut_slice()
        .iter_mut()
        .map(|v| {
            if *v > T::zero() {
                true
            } else {
                *v = T::zero();
                false
            }
        })
        .collect()
}

pub fn relu_backward<T: Real>(upstream: &Matrix<T>, mask: &[bool]) -> Matrix<T> {
    let mut g = upstream.clone();
    for (v, &keep) in g.as_mut_slice().iter_mut().zip(mask) {
        if !keep {
            *v = T::zero();
        }
    }
    g
}

/// One shared point-wise MLP: `act(BN(x Wᵀ + b))`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpLayer<T = f32> {
    pub linear: Linear<T>,
    pub bn: Option<BatchNorm<T>>,
    pub activation: Activation,
    relu_mask: Option<Vec<bool>>,
}

impl<T: Real> MlpLayer<T> {
    pub fn new<R: Rng + ?Sized>(
        in_ch: usize,
        out_ch: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        Self::from_parts(Linear::new(in_ch, out_ch, true, rng), Some(BatchNorm::new(out_ch)), activation)
    }

    pub fn from_parts(linear: Linear<T>, bn: Option<BatchNorm<T>>, activation: Activation) -> Self {
        Self { linear, bn, activation, relu_mask: None }
    }

    pub fn in_ch(&self) -> usize {
        self.linear.in_ch()
    }

    pub fn out_ch(&self) -> usize {
        self.linear.out_ch()
    }

    pub fn forward(&mut self, input: &Matrix<T>, mode: Mode) -> Result<Matrix<T>> {
        if input.cols() != self.in_ch() {
            return Err(shape_err!(
                "mlp {}->{} applied to {} channels",
                self.in_ch(),
                self.out_ch(),
                input.cols()
            ));
        }
        if mode == Mode::Train && input.rows() < 2 && self.bn.is_some() {
            return Err(Error::DegenerateBatch(input.rows()));
        }
        let mut x = self.linear.forward(input, mode)?;
        if let Some(bn) = &mut self.bn {
            x = bn.forward(&x, mode)?;
        }
        self.relu_mask = match self.activation {
            Activation::Relu => {
                let mask = relu_in_place(&mut x);
                (mode == Mode::Train).then_some(mask)
            }
            Activation::None => None,
        };
        Ok(x)
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, upstream: &Matrix<T>) -> Result<Matrix<T>> {
        let mut g = match self.activation {
            Activation::Relu => {
                let mask = self.relu_mask.take().ok_or(Error::Tape("mlp"))?;
                if mask.len() != upstream.as_slice().len() {
                    return Err(shape_err!("mlp upstream {:?}", upstream.shape()));
                }
                relu_backward(upstream, &mask)
            }
            Activation::None => upstream.clone(),
        };
        if let Some(bn) = &mut self.bn {
            g = bn.backward(&g)?;
        }
        self.linear.backward(&g)
    }
}

impl<T: Real> Layer<T> for MlpLayer<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        self.linear.visit_params(f);
        self.bn.visit_params(f);
    }

    fn visit_buffers(&mut self, f: &mut dyn FnMut(&mut Vec<T>)) {
        self.bn.visit_buffers(f);
    }
}

/// Runs a stack of MLPs front to back.
pub fn forward_stack<T: Real>(
    layers: &mut [MlpLayer<T>],
    input: &Matrix<T>,
    mode: Mode,
) -> Result<Matrix<T>> {
    let mut x = input.clone();
    for l in layers.iter_mut() {
        x = l.forward(&x, mode)?;
    }
    Ok(x)
}

pub fn backward_stack<T: Real>(layers: &mut [MlpLayer<T>], upstream: &Matrix<T>) -> Result<Matrix<T>> {
    let mut g = upstream.clone();
    for l in layers.iter_mut().rev() {
        g = l.backward(&g)?;
    }
    Ok(g)
}

/// SGD with momentum and L2 weight decay:
/// `v = momentum * v + (g + decay * p)`, `p -= lr * v`.
#[derive(Clone, Debug)]
pub struct Sgd<T = f32> {
    pub lr: T,
    pub momentum: T,
    pub weight_decay: T,
    velocity: Vec<Vec<T>>,
}

/// Default optimizer momentum.
pub const SGD_MOMENTUM: f64 = 0.98;
pub const SGD_WEIGHT_DECAY: f64 = 0.001;

impl<T: Real> Sgd<T> {
    /// `lr == 0` is accepted and leaves parameters untouched.
    pub fn new(lr: T, momentum: T, weight_decay: T) -> Result<Self> {
        if !(lr >= T::zero()) || !lr.is_finite() {
            return Err(crate::error::config_err!("learning rate must be >= 0, got {lr}"));
        }
        if !(momentum >= T::zero() && momentum < T::one()) {
            return Err(crate::error::config_err!("momentum must be in [0, 1), got {momentum}"));
        }
        if !(weight_decay >= T::zero()) {
            return Err(crate::error::config_err!("weight decay must be >= 0, got {weight_decay}"));
        }
        Ok(Self { lr, momentum, weight_decay, velocity: Vec::new() })
    }

    pub fn step(&mut self, model: &mut dyn Layer<T>) -> Result<()> {
        let (lr, mu, wd) = (self.lr, self.momentum, self.weight_decay);
        let velocity = &mut self.velocity;
        let mut slot = 0usize;
        let mut err = None;
        model.visit_params(&mut |p| {
            let n = p.value.as_slice().len();
            if velocity.len() <= slot {
                velocity.push(alloc::vec![T::zero(); n]);
            }
            let v = &mut velocity[slot];
            slot += 1;
            if v.len() != n || p.grad.as_slice().len() != n {
                err = Some(shape_err!("optimizer slot {} has {} values, param {n}", slot - 1, v.len()));
                return;
            }
            if lr == T::zero() {
                return;
            }
            let vals = p.value.as_mut_slice();
            let grads = p.grad.as_slice();
            for i in 0..n {
                let g = grads[i] + wd * vals[i];
                v[i] = mu * v[i] + g;
                vals[i] -= lr * v[i];
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}
