//! Point-set kernels: farthest point sampling, radius neighbor search and
//! neighborhood grouping.

mod ball_query;
mod cloud;
mod fps;
mod group;

pub use ball_query::{ball_query, NeighborTable};
pub use cloud::{dist2, Point, PointCloud};
pub use fps::farthest_point_sample;
pub use group::{group, relative_positions, scatter_grouped, GroupedTensor};
