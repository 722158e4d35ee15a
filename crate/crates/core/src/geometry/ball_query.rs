use alloc::vec::Vec;

use super::{dist2, Point};
use crate::error::{arg_err, shape_err, Result};
use crate::Real;

/// Per-query neighbor indices into a support set, `k` slots per row.
///
/// Rows with fewer than `k` neighbors repeat their first neighbor; those
/// repeats are flagged in `pad`. Every row holds at least one real neighbor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborTable {
    k: usize,
    indices: Vec<u32>,
    pad: Vec<bool>,
    /// Rows whose ball was empty and fell back to the nearest support point.
    pub fallback_rows: usize,
}

impl NeighborTable {
    pub fn new(k: usize, indices: Vec<u32>, pad: Vec<bool>) -> Result<Self> {
        if k == 0 || !indices.len().is_multiple_of(k) || pad.len() != indices.len() {
            return Err(shape_err!(
                "neighbor table with k={k}, {} indices, {} pad flags",
                indices.len(),
                pad.len()
            ));
        }
        if pad.chunks(k).any(|row| row.iter().all(|&p| p)) {
            return Err(arg_err!("every neighbor row needs at least one real neighbor"));
        }
        Ok(Self { k, indices, pad, fallback_rows: 0 })
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.indices.len() / self.k
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn pad_mask(&self) -> &[bool] {
        &self.pad
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.indices[i * self.k..(i + 1) * self.k]
    }

    pub fn row_pads(&self, i: usize) -> &[bool] {
        &self.pad[i * self.k..(i + 1) * self.k]
    }

    /// Real (non-pad) neighbors of row `i`.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = u32> + '_ {
        self.row(i)
            .iter()
            .zip(self.row_pads(i))
            .filter(|(_, &p)| !p)
            .map(|(&j, _)| j)
    }

    pub fn max_index(&self) -> Option<u32> {
        self.indices.iter().copied().max()
    }

    /// Rewrites every index through `map` (e.g. subset row -> global row).
    pub fn remap(&self, map: &[u32]) -> Self {
        Self {
            k: self.k,
            indices: self.indices.iter().map(|&i| map[i as usize]).collect(),
            pad: self.pad.clone(),
            fallback_rows: self.fallback_rows,
        }
    }

    /// Stacks tables row-wise, adding `offsets[t]` to the indices of table `t`.
    pub fn concat(tables: &[Self], offsets: &[u32]) -> Result<Self> {
        let k = tables.first().map_or(1, |t| t.k);
        if tables.iter().any(|t| t.k != k) || offsets.len() != tables.len() {
            return Err(shape_err!("cannot concat neighbor tables of differing k"));
        }
        let mut indices = Vec::new();
        let mut pad = Vec::new();
        let mut fallback_rows = 0;
        for (t, &off) in tables.iter().zip(offsets) {
            indices.extend(t.indices.iter().map(|&i| i + off));
            pad.extend_from_slice(&t.pad);
            fallback_rows += t.fallback_rows;
        }
        Ok(Self { k, indices, pad, fallback_rows })
    }

    /// Applies `perm` to the slot order of every row (pad flags travel with their slot).
    pub fn permute_slots(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.k {
            return Err(arg_err!("slot permutation of length {} for k={}", perm.len(), self.k));
        }
        let mut out = self.clone();
        for r in 0..self.rows() {
            for (dst, &s) in perm.iter().enumerate() {
                out.indices[r * self.k + dst] = self.row(r)[s];
                out.pad[r * self.k + dst] = self.row_pads(r)[s];
            }
        }
        Ok(out)
    }
}

type CellKey = (i32, i32, i32);

/// Uniform grid over the support set with cells slightly larger than the radius,
/// so a radius ball never reaches past the 27 surrounding cells.
struct Grid {
    inv_cell: f64,
    /// (cell, support index), sorted.
    entries: Vec<(CellKey, u32)>,
}

const CELL_SLACK: f64 = 1.0 + 1e-4;

impl Grid {
    fn build<T: Real>(support: &[Point<T>], radius: T) -> Self {
        let inv_cell = 1.0 / (radius.as_f64() * CELL_SLACK);
        let mut entries: Vec<(CellKey, u32)> = support
            .iter()
            .enumerate()
            .map(|(i, p)| (cell_of(p, inv_cell), i as u32))
            .collect();
        entries.sort_unstable();
        Self { inv_cell, entries }
    }

    fn cell_range(&self, key: CellKey) -> &[(CellKey, u32)] {
        let lo = self.entries.partition_point(|e| e.0 < key);
        let hi = lo + self.entries[lo..].partition_point(|e| e.0 == key);
        &self.entries[lo..hi]
    }
}

fn cell_of<T: Real>(p: &Point<T>, inv_cell: f64) -> CellKey {
    let c = |v: T| {
        let f = num_traits::Float::floor(v.as_f64() * inv_cell);
        f.clamp(i32::MIN as f64 + 2.0, i32::MAX as f64 - 2.0) as i32
    };
    (c(p[0]), c(p[1]), c(p[2]))
}

/// Radius neighbor search.
///
/// For every query: up to `k` support indices within distance `radius`
/// (inclusive), in ascending index order; short rows are padded with their
/// first neighbor. A query with an empty ball gets its nearest support point
/// (lowest index on ties) and is counted in `fallback_rows`.
pub fn ball_query<T: Real>(
    query: &[Point<T>],
    support: &[Point<T>],
    radius: T,
    k: usize,
) -> Result<NeighborTable> {
    if support.is_empty() {
        return Err(arg_err!("ball query against an empty support set"));
    }
    if !(radius > T::zero()) || !radius.is_finite() {
        return Err(arg_err!("ball query radius must be positive, got {radius}"));
    }
    if k == 0 {
        return Err(arg_err!("ball query needs k >= 1"));
    }
    let grid = Grid::build(support, radius);
    let r2 = radius * radius;
    let mut indices = Vec::with_capacity(query.len() * k);
    let mut pad = Vec::with_capacity(query.len() * k);
    let mut fallback_rows = 0;
    let mut found: Vec<u32> = Vec::new();
    for q in query {
        found.clear();
        let (cx, cy, cz) = cell_of(q, grid.inv_cell);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    for &(_, j) in grid.cell_range((cx + dx, cy + dy, cz + dz)) {
                        if dist2(&support[j as usize], q) <= r2 {
                            found.push(j);
                        }
                    }
                }
            }
        }
        if found.is_empty() {
            fallback_rows += 1;
            found.push(nearest(q, support));
        } else {
            found.sort_unstable();
            found.truncate(k);
        }
        let first = found[0];
        for s in 0..k {
            match found.get(s) {
                Some(&j) => {
                    indices.push(j);
                    pad.push(false);
                }
                None => {
                    indices.push(first);
                    pad.push(true);
                }
            }
        }
    }
    Ok(NeighborTable { k, indices, pad, fallback_rows })
}

fn nearest<T: Real>(q: &Point<T>, support: &[Point<T>]) -> u32 {
    let mut best = 0;
    let mut best_d = T::infinity();
    for (j, p) in support.iter().enumerate() {
        let d = dist2(p, q);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn overlapping_points_pick_lowest_index() {
        let pts = [[0.25f32, 0.5, 0.5]; 3];
        let t = ball_query(&pts, &pts, 10.0, 1).unwrap();
        assert_eq!(t.indices(), &[0, 0, 0]);
        assert!(t.pad_mask().iter().all(|&p| !p));
    }

    #[test]
    fn hand_distances_with_padding() {
        let support = [[0.0f32, 0.0, 0.0], [0.5, 0.0, 0.0], [2.0, 0.0, 0.0]];
        let t = ball_query(&[[0.0, 0.0, 0.0]], &support, 1.0, 4).unwrap();
        assert_eq!(t.indices(), &[0, 1, 0, 0]);
        assert_eq!(t.pad_mask(), &[false, false, true, true]);
    }

    #[test]
    fn boundary_is_inclusive() {
        let support = [[0.5f32, 0.0, 0.0]];
        let t = ball_query(&[[0.0, 0.0, 0.0]], &support, 0.5, 2).unwrap();
        assert_eq!(t.fallback_rows, 0);
        assert_eq!(t.indices(), &[0, 0]);
    }

    #[test]
    fn empty_ball_falls_back_to_nearest() {
        let support = [[5.0f32, 0.0, 0.0], [3.0, 0.0, 0.0], [3.0, 0.0, 0.0]];
        let t = ball_query(&[[0.0, 0.0, 0.0]], &support, 0.1, 3).unwrap();
        assert_eq!(t.indices(), &[1, 1, 1]);
        assert_eq!(t.pad_mask(), &[false, true, true]);
        assert_eq!(t.fallback_rows, 1);
    }

    #[test]
    fn argument_errors() {
        let p = [[0.0f32; 3]];
        assert!(ball_query(&p, &[], 1.0, 1).is_err());
        assert!(ball_query(&p, &p, 0.0, 1).is_err());
        assert!(ball_query(&p, &p, 1.0, 0).is_err());
    }

    #[test]
    fn negative_coordinates() {
        let support = [[-0.05f32, -0.05, -0.05], [0.05, 0.05, 0.05], [-1.0, 0.0, 0.0]];
        let t = ball_query(&[[0.0, 0.0, 0.0]], &support, 0.1, 3).unwrap();
        assert_eq!(t.indices(), &[0, 1, 0]);
    }

    #[test]
    fn concat_offsets() {
        let a = NeighborTable::new(2, vec![0, 1], vec![false, false]).unwrap();
        let b = NeighborTable::new(2, vec![1, 1], vec![false, true]).unwrap();
        let c = NeighborTable::concat(&[a, b], &[0, 10]).unwrap();
        assert_eq!(c.indices(), &[0, 1, 11, 11]);
        assert_eq!(c.rows(), 2);
    }
}
