use alloc::vec::Vec;

use crate::error::{arg_err, shape_err, Result};
use crate::tensor::Matrix;
use crate::Real;

pub type Point<T = f32> = [T; 3];

/// Positions plus a per-point feature matrix, optionally labeled.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud<T = f32> {
    positions: Vec<Point<T>>,
    features: Matrix<T>,
    pub label: Option<usize>,
}

impl<T: Real> PointCloud<T> {
    pub fn new(positions: Vec<Point<T>>, features: Matrix<T>, label: Option<usize>) -> Result<Self> {
        if positions.len() != features.rows() {
            return Err(shape_err!(
                "{} positions but {} feature rows",
                positions.len(),
                features.rows()
            ));
        }
        if let Some(i) = positions.iter().position(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(arg_err!("point {i} has a non-finite coordinate"));
        }
        Ok(Self { positions, features, label })
    }

    /// A cloud whose features are its own coordinates.
    pub fn from_positions(positions: Vec<Point<T>>, label: Option<usize>) -> Result<Self> {
        let features = Matrix::from_fn(positions.len(), 3, |r, c| positions[r][c]);
        Self::new(positions, features, label)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point<T>] {
        &self.positions
    }

    pub fn features(&self) -> &Matrix<T> {
        &self.features
    }

    pub fn channels(&self) -> usize {
        self.features.cols()
    }

    pub fn into_parts(self) -> (Vec<Point<T>>, Matrix<T>, Option<usize>) {
        (self.positions, self.features, self.label)
    }

    /// Rows `indices`, in order.
    pub fn select(&self, indices: &[u32]) -> Self {
        Self {
            positions: indices.iter().map(|&i| self.positions[i as usize]).collect(),
            features: self.features.gather_rows(indices),
            label: self.label,
        }
    }

    pub fn cast<U: Real>(&self) -> PointCloud<U> {
        PointCloud {
            positions: self
                .positions
                .iter()
                .map(|p| p.map(|v| U::of(v.as_f64())))
                .collect(),
            features: self.features.cast(),
            label: self.label,
        }
    }
}

#[inline]
pub fn dist2<T: Real>(a: &Point<T>, b: &Point<T>) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}
