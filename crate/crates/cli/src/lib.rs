//! Host-side companion to `assa-core`: CSV point clouds, dataset directories,
//! TOML run configuration, wall-clock latency measurement and the `assa`
//! command-line tool.

pub mod cli;
pub mod config;
pub mod equiv;
pub mod io;
pub mod latency;
