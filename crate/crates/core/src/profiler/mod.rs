//! Analytic FLOP counts, latency bucket hooks and feature-pattern extraction.

mod flops;
mod patterns;
mod probe;

pub use flops::{closed_form_ratio, count_backbone_flops, count_block, count_sa_flops, BucketFlops, FlopsReport};
pub use patterns::{extract_feature_patterns, patterns_from_traces, Cell, NeuronPattern, PatternConfig};
pub use probe::{timed, Bucket, NoProbe, Probe};
