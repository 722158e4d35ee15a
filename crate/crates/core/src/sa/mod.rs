//! The four set-abstraction variants as trainable blocks.
//!
//! * vanilla: group raw neighbor features (optionally with their normalized
//!   offsets), run the MLPs on every neighbor copy, pool.
//! * pre-conv: run the MLPs on the points, then group and pool. Without edge
//!   features this equals vanilla, since grouping does not depend on features
//!   and the MLPs are shared point-wise.
//! * separable: `ceil(L/2)` MLPs on the points give `f_res`; group and pool
//!   `f_res`; remaining MLPs on the pooled features; add `f_res` and apply ReLU.
//! * ASSA: separable with the last pre-pooling MLP narrowed to `ceil(C/3)`,
//!   anisotropic pooling back to `3 * ceil(C/3)` channels, and a linear
//!   shortcut from the bottleneck to `C` before the final ReLU.

mod block;
mod config;

use alloc::vec::Vec;

pub use block::{SaBlock, SaInput};
pub use config::{SaConfig, SaKind, SaVariant};

use crate::error::Result;
use crate::geometry::{ball_query, farthest_point_sample, NeighborTable, Point, PointCloud};
use crate::profiler::{timed, Bucket, Probe};
use crate::tensor::Mode;
use crate::Real;

/// Ball query for `queries` (rows of `positions`) against the block's support set.
pub fn neighbor_table<T: Real>(cfg: &SaConfig, positions: &[Point<T>], queries: &[u32]) -> Result<NeighborTable> {
    let qpos: Vec<Point<T>> = queries.iter().map(|&q| positions[q as usize]).collect();
    let radius = T::of(cfg.radius);
    if cfg.support_from_subsampled {
        ball_query(&qpos, &qpos, radius, cfg.k)
    } else {
        ball_query(&qpos, positions, radius, cfg.k)
    }
}

/// Subsamples `cloud` to `m` points with farthest point sampling (start index 0)
/// and aggregates each sampled point's neighborhood with `block`.
pub fn abstract_cloud<T: Real>(
    block: &mut SaBlock<T>,
    cloud: &PointCloud<T>,
    m: usize,
    mode: Mode,
    probe: &mut dyn Probe,
) -> Result<PointCloud<T>> {
    let queries = timed(probe, Bucket::Subsampling, || farthest_point_sample(cloud.positions(), m, 0))?;
    let table = timed(probe, Bucket::Grouping, || neighbor_table(block.config(), cloud.positions(), &queries))?;
    let input = SaInput { positions: cloud.positions(), features: cloud.features() };
    let features = block.forward(input, &queries, &table, mode, probe)?;
    let positions = queries.iter().map(|&q| cloud.positions()[q as usize]).collect();
    PointCloud::new(positions, features, cloud.label)
}
