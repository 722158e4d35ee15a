use alloc::vec;
use alloc::vec::Vec;

use super::{dist2, Point};
use crate::error::{arg_err, Result};
use crate::Real;

/// Greedy farthest point sampling.
///
/// Starts at `start`; every later pick is the unselected point with the largest
/// squared distance to its nearest selected point, lowest index on ties.
pub fn farthest_point_sample<T: Real>(points: &[Point<T>], m: usize, start: usize) -> Result<Vec<u32>> {
    let n = points.len();
    if m == 0 || m > n {
        return Err(arg_err!("cannot sample {m} of {n} points"));
    }
    if start >= n {
        return Err(arg_err!("start index {start} out of range for {n} points"));
    }
    let mut picked = Vec::with_capacity(m);
    let mut taken = vec![false; n];
    let mut min_d = vec![T::infinity(); n];
    let mut current = start;
    for _ in 0..m {
        picked.push(current as u32);
        taken[current] = true;
        let c = points[current];
        let mut best = usize::MAX;
        let mut best_d = T::neg_infinity();
        for (i, p) in points.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let d = dist2(p, &c);
            if d < min_d[i] {
                min_d[i] = d;
            }
            if min_d[i] > best_d {
                best_d = min_d[i];
                best = i;
            }
        }
        current = best;
    }
    Ok(picked)
}
