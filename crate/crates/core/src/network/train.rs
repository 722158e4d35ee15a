use alloc::vec::Vec;

// f64 math comes from libm when std is absent
#[allow(unused_imports)]
use num_traits::Float;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{argmax_rows, softmax_cross_entropy, Backbone};
use crate::error::{arg_err, config_err, Error, Result};
use crate::geometry::PointCloud;
use crate::tensor::{Layer, Mode, Sgd, SGD_MOMENTUM, SGD_WEIGHT_DECAY};
use crate::real::math;
use crate::Real;

/// Wall-clock source for epoch timings. The core crate has no clock of its own.
pub trait Clock {
    /// Seconds since an arbitrary fixed origin.
    fn now_secs(&mut self) -> f64;
}

/// Reports every epoch as taking zero time.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_secs(&mut self) -> f64 {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Seeds the shuffle order.
    pub seed: u64,
    /// Anneal the learning rate from `lr` towards 0 along a half cosine.
    pub cosine: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 16,
            lr: 0.01,
            momentum: SGD_MOMENTUM,
            weight_decay: SGD_WEIGHT_DECAY,
            seed: 0,
            cosine: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub wall_secs: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
}

impl TrainReport {
    pub fn final_test_acc(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.test_acc)
    }
}

fn labels_of<T>(clouds: &[&PointCloud<T>]) -> Result<Vec<usize>> {
    clouds
        .iter()
        .enumerate()
        .map(|(i, c)| c.label.ok_or_else(|| arg_err!("cloud {i} has no label")))
        .collect()
}

/// Predicted class of every cloud, evaluated in batches of `batch_size`.
pub fn predict<T: Real>(model: &mut Backbone<T>, data: &[PointCloud<T>], batch_size: usize) -> Result<Vec<usize>> {
    if batch_size == 0 {
        return Err(config_err!("batch size must be >= 1"));
    }
    let mut out = Vec::with_capacity(data.len());
    for chunk in data.chunks(batch_size) {
        let refs: Vec<&PointCloud<T>> = chunk.iter().collect();
        out.extend(argmax_rows(&model.forward(&refs, Mode::Eval)?));
    }
    Ok(out)
}

/// Fraction of correctly classified clouds; 0 for an empty set.
pub fn evaluate<T: Real>(model: &mut Backbone<T>, data: &[PointCloud<T>], batch_size: usize) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let pred = predict(model, data, batch_size)?;
    let refs: Vec<&PointCloud<T>> = data.iter().collect();
    let labels = labels_of(&refs)?;
    let hits = pred.iter().zip(&labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / data.len() as f64)
}

/// Minibatch SGD on softmax cross-entropy. The shuffle order depends only on `cfg.seed`.
pub fn train<T: Real>(
    model: &mut Backbone<T>,
    train_set: &[PointCloud<T>],
    test_set: &[PointCloud<T>],
    cfg: &TrainConfig,
    clock: &mut dyn Clock,
) -> Result<TrainReport> {
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(config_err!("epochs and batch size must be >= 1"));
    }
    if train_set.is_empty() {
        return Err(arg_err!("empty training set"));
    }
    let classes = model.config().num_classes;
    for (i, c) in train_set.iter().chain(test_set).enumerate() {
        match c.label {
            Some(l) if l < classes => {}
            Some(l) => return Err(arg_err!("cloud {i} label {l} out of range for {classes} classes")),
            None => return Err(arg_err!("cloud {i} has no label")),
        }
    }
    let mut opt = Sgd::new(T::of(cfg.lr), T::of(cfg.momentum), T::of(cfg.weight_decay))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut report = TrainReport::default();

    for epoch in 0..cfg.epochs {
        let start = clock.now_secs();
        if cfg.cosine {
            let t = epoch as f64 / cfg.epochs as f64;
            opt.lr = T::of(0.5 * cfg.lr * (1.0 + math::cos(core::f64::consts::PI * t)));
        }
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut hits = 0usize;
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let clouds: Vec<&PointCloud<T>> = idx.iter().map(|&i| &train_set[i]).collect();
            let labels = labels_of(&clouds)?;
            model.zero_grad();
            let logits = model.forward(&clouds, Mode::Train)?;
            let (loss, dlogits) = softmax_cross_entropy(&logits, &labels)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch, loss });
            }
            hits += argmax_rows(&logits).iter().zip(&labels).filter(|(p, l)| p == l).count();
            loss_sum += loss * idx.len() as f64;
            model.backward(&dlogits)?;
            opt.step(model)?;
        }
        let n = train_set.len() as f64;
        let test_acc = evaluate(model, test_set, cfg.batch_size)?;
        report.epochs.push(EpochStats {
            epoch,
            train_loss: loss_sum / n,
            train_acc: hits as f64 / n,
            test_acc,
            wall_secs: clock.now_secs() - start,
        });
    }
    Ok(report)
}
