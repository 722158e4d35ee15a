use alloc::vec::Vec;

use super::{NeighborTable, Point};
use crate::error::{arg_err, shape_err, Result};
use crate::tensor::Matrix;
use crate::Real;

/// Gathered neighborhoods: `m * k` rows of features (row `i * k + j` is slot
/// `j` of query `i`) plus relative positions already divided by the radius.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupedTensor<T = f32> {
    pub k: usize,
    pub features: Matrix<T>,
    pub rel_positions: Vec<Point<T>>,
    pub pad: Vec<bool>,
    pub radius: T,
}

impl<T: Real> GroupedTensor<T> {
    pub fn queries(&self) -> usize {
        self.features.rows() / self.k
    }

    pub fn channels(&self) -> usize {
        self.features.cols()
    }

    /// Same geometry and pads with new per-slot features (e.g. after an MLP).
    pub fn with_features(&self, features: Matrix<T>) -> Result<Self> {
        if features.rows() != self.features.rows() {
            return Err(shape_err!(
                "{} feature rows for {} neighbor slots",
                features.rows(),
                self.features.rows()
            ));
        }
        Ok(Self {
            k: self.k,
            features,
            rel_positions: self.rel_positions.clone(),
            pad: self.pad.clone(),
            radius: self.radius,
        })
    }

    /// Relative positions as an `(m*k) x 3` matrix.
    pub fn rel_matrix(&self) -> Matrix<T> {
        Matrix::from_fn(self.rel_positions.len(), 3, |r, c| self.rel_positions[r][c])
    }
}

/// Relative positions `(support[idx] - query[i]) / radius` for every slot.
pub fn relative_positions<T: Real>(
    query: &[Point<T>],
    support: &[Point<T>],
    table: &NeighborTable,
    radius: T,
) -> Result<Vec<Point<T>>> {
    if !(radius > T::zero()) {
        return Err(arg_err!("grouping radius must be positive, got {radius}"));
    }
    if table.rows() != query.len() {
        return Err(shape_err!("{} neighbor rows for {} queries", table.rows(), query.len()));
    }
    if let Some(max) = table.max_index() {
        if max as usize >= support.len() {
            return Err(shape_err!("neighbor index {max} out of range for {} support points", support.len()));
        }
    }
    let inv = T::one() / radius;
    let k = table.k();
    let mut rel = Vec::with_capacity(query.len() * k);
    for (i, q) in query.iter().enumerate() {
        for &j in table.row(i) {
            let s = support[j as usize];
            rel.push([(s[0] - q[0]) * inv, (s[1] - q[1]) * inv, (s[2] - q[2]) * inv]);
        }
    }
    Ok(rel)
}

/// Gathers support features and normalized relative positions per neighbor slot.
pub fn group<T: Real>(
    query: &[Point<T>],
    support: &[Point<T>],
    support_features: &Matrix<T>,
    table: &NeighborTable,
    radius: T,
) -> Result<GroupedTensor<T>> {
    if support_features.rows() != support.len() {
        return Err(shape_err!(
            "{} support feature rows for {} support points",
            support_features.rows(),
            support.len()
        ));
    }
    let rel_positions = relative_positions(query, support, table, radius)?;
    Ok(GroupedTensor {
        k: table.k(),
        features: support_features.gather_rows(table.indices()),
        rel_positions,
        pad: table.pad_mask().to_vec(),
        radius,
    })
}

/// Adjoint of the feature gather in [`group`]: sums slot gradients back onto support rows.
pub fn scatter_grouped<T: Real>(table: &NeighborTable, grad: &Matrix<T>, support_rows: usize) -> Matrix<T> {
    let mut out = Matrix::zeros(support_rows, grad.cols());
    out.scatter_add_rows(table.indices(), grad);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn coincident_neighbor_has_zero_offset() {
        let p = [[0.3f32, 0.2, 0.1]];
        let t = NeighborTable::new(1, vec![0], vec![false]).unwrap();
        let g = group(&p, &p, &Matrix::filled(1, 2, 1.0), &t, 0.5).unwrap();
        assert_eq!(g.rel_positions, vec![[0.0, 0.0, 0.0]]);
    }

    #[test]
    fn boundary_normalizes_to_unit() {
        let t = NeighborTable::new(1, vec![0], vec![false]).unwrap();
        let g = group(&[[0.0f32; 3]], &[[0.5, 0.0, 0.0]], &Matrix::zeros(1, 1), &t, 0.5).unwrap();
        assert_eq!(g.rel_positions, vec![[1.0, 0.0, 0.0]]);
    }

    #[test]
    fn bad_radius_and_index() {
        let t = NeighborTable::new(1, vec![3], vec![false]).unwrap();
        let p = [[0.0f32; 3]];
        assert!(group(&p, &p, &Matrix::zeros(1, 1), &t, 1.0).is_err());
        let t = NeighborTable::new(1, vec![0], vec![false]).unwrap();
        assert!(group(&p, &p, &Matrix::zeros(1, 1), &t, 0.0).is_err());
    }
}
