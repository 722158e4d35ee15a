use alloc::vec::Vec;

use rand::Rng;

use super::Matrix;
use crate::error::{shape_err, Error, Result};
use crate::Real;

/// Whether a forward pass records a tape and uses batch statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A trainable tensor and its gradient accumulator.
#[derive(Clone, Debug, PartialEq)]
pub struct Param<T = f32> {
    pub value: Matrix<T>,
    pub grad: Matrix<T>,
}

impl<T: Real> Param<T> {
    pub fn new(value: Matrix<T>) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Self { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }
}

/// Visitor access to trainable parameters and persistent buffers.
///
/// Visitation order is stable and defines both the optimizer's momentum
/// slots and the checkpoint tensor order.
pub trait Layer<T: Real> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<T>));

    /// Non-trainable state that still belongs in a checkpoint (BN running stats).
    fn visit_buffers(&mut self, _f: &mut dyn FnMut(&mut Vec<T>)) {}

    fn zero_grad(&mut self) {
        self.visit_params(&mut |p| p.zero_grad());
    }

    fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |p| n += p.value.as_slice().len());
        n
    }
}

impl<T: Real, L: Layer<T>> Layer<T> for Vec<L> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        for l in self.iter_mut() {
            l.visit_params(f);
        }
    }
    fn visit_buffers(&mut self, f: &mut dyn FnMut(&mut Vec<T>)) {
        for l in self.iter_mut() {
            l.visit_buffers(f);
        }
    }
}

impl<T: Real, L: Layer<T>> Layer<T> for Option<L> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        if let Some(l) = self {
            l.visit_params(f);
        }
    }
    fn visit_buffers(&mut self, f: &mut dyn FnMut(&mut Vec<T>)) {
        if let Some(l) = self {
            l.visit_buffers(f);
        }
    }
}

/// Fan-in scaled uniform init: `U(-b, b)` with `b = sqrt(6 / fan_in)`.
pub const KAIMING_GAIN: f64 = 6.0;

pub fn kaiming_uniform<T: Real, R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    fan_in: usize,
    rng: &mut R,
) -> Matrix<T> {
    let bound = num_traits::Float::sqrt(KAIMING_GAIN / fan_in.max(1) as f64);
    Matrix::from_fn(rows, cols, |_, _| T::of(rng.random_range(-bound..bound)))
}

/// Fully connected layer `y = x Wᵀ + b` applied row-wise.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear<T = f32> {
    pub weight: Param<T>,
    pub bias: Option<Param<T>>,
    tape: Option<Matrix<T>>,
}

impl<T: Real> Linear<T> {
    pub fn new<R: Rng + ?Sized>(in_ch: usize, out_ch: usize, bias: bool, rng: &mut R) -> Self {
        let weight = Param::new(kaiming_uniform(out_ch, in_ch, in_ch, rng));
        let bias = bias.then(|| Param::new(Matrix::zeros(1, out_ch)));
        Self { weight, bias, tape: None }
    }

    pub fn from_parts(weight: Matrix<T>, bias: Option<Matrix<T>>) -> Result<Self> {
        if let Some(b) = &bias {
            if b.shape() != (1, weight.rows()) {
                return Err(shape_err!("bias {:?} for weight {:?}", b.shape(), weight.shape()));
            }
        }
        Ok(Self { weight: Param::new(weight), bias: bias.map(Param::new), tape: None })
    }

    pub fn zeroed(in_ch: usize, out_ch: usize, bias: bool) -> Self {
        Self {
            weight: Param::new(Matrix::zeros(out_ch, in_ch)),
            bias: bias.then(|| Param::new(Matrix::zeros(1, out_ch))),
            tape: None,
        }
    }

    pub fn in_ch(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn out_ch(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn forward(&mut self, input: &Matrix<T>, mode: Mode) -> Result<Matrix<T>> {
        if input.cols() != self.in_ch() {
            return Err(shape_err!(
                "linear expects {} input channels, got {}",
                self.in_ch(),
                input.cols()
            ));
        }
        let wt = self.weight.value.transpose();
        let mut out = super::matmul(input, &wt)?;
        if let Some(b) = &self.bias {
            let b = b.value.as_slice();
            for r in 0..out.rows() {
                for (o, &bv) in out.row_mut(r).iter_mut().zip(b) {
                    *o += bv;
                }
            }
        }
        self.tape = match mode {
            Mode::Train => Some(input.clone()),
            Mode::Eval => None,
        };
        Ok(out)
    }

    /// Accumulates `dW`, `db` and returns `dx`.
    pub fn backward(&mut self, upstream: &Matrix<T>) -> Result<Matrix<T>> {
        let input = self.tape.take().ok_or(Error::Tape("linear"))?;
        if upstream.shape() != (input.rows(), self.out_ch()) {
            return Err(shape_err!("linear upstream {:?}", upstream.shape()));
        }
        super::matmul_tn_acc(upstream, &input, &mut self.weight.grad)?;
        if let Some(b) = &mut self.bias {
            let g = b.grad.as_mut_slice();
            for r in 0..upstream.rows() {
                for (gv, &u) in g.iter_mut().zip(upstream.row(r)) {
                    *gv += u;
                }
            }
        }
        super::matmul(upstream, &self.weight.value)
    }
}

impl<T: Real> Layer<T> for Linear<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.weight);
        if let Some(b) = &mut self.bias {
            f(b);
        }
    }
}
