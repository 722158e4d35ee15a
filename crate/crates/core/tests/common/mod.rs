#![allow(dead_code)]

use assa_core::geometry::{GroupedTensor, NeighborTable, Point};
use assa_core::tensor::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cube_points<R: Rng>(rng: &mut R, n: usize) -> Vec<Point<f64>> {
    (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect()
}

pub fn cube_points_f32<R: Rng>(rng: &mut R, n: usize) -> Vec<Point<f32>> {
    (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect()
}

pub fn uniform<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn uniform_f32<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix<f32> {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0f32..1.0))
}

/// A grouped tensor with random features, offsets in the unit ball and some pads.
pub fn random_grouped<R: Rng>(rng: &mut R, m: usize, k: usize, c: usize) -> GroupedTensor<f64> {
    let features = uniform(rng, m * k, c);
    let rel_positions = (0..m * k)
        .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    let pad = (0..m * k).map(|s| s % k != 0 && rng.random_bool(0.2)).collect();
    GroupedTensor { k, features, rel_positions, pad, radius: 1.0 }
}

pub fn random_table<R: Rng>(rng: &mut R, m: usize, k: usize, support: usize) -> NeighborTable {
    let indices = (0..m * k).map(|_| rng.random_range(0..support as u32)).collect();
    let pad = (0..m * k).map(|s| s % k != 0 && rng.random_bool(0.2)).collect();
    NeighborTable::new(k, indices, pad).unwrap()
}

pub fn shuffled<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

pub fn max_abs(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
