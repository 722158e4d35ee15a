use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

// f64 math comes from libm when std is absent
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{arg_err, config_err, Result};
use crate::geometry::PointCloud;
use crate::network::{Backbone, StageTrace};
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatternConfig {
    /// Neurons `0..neurons` of the first stage output are examined.
    pub neurons: usize,
    /// Local point sets kept per neuron, strongest activation first.
    pub top_m: usize,
    pub voxel_size: f64,
    /// A cell is kept when its votes reach this fraction of the busiest cell.
    pub keep_fraction: f64,
    /// Vote with offsets from each sampled center instead of absolute positions.
    pub local: bool,
}

impl Default for PatternConfig {
    fn default() -> Self {
        Self { neurons: 8, top_m: 20, voxel_size: 0.05, keep_fraction: 0.3, local: true }
    }
}

pub type Cell = [i64; 3];

#[derive(Clone, Debug, PartialEq)]
pub struct NeuronPattern {
    pub neuron: usize,
    /// Points of the top local sets that fall in kept cells.
    pub points: Vec<[f64; 3]>,
    /// Votes per occupied cell, before thresholding.
    pub votes: BTreeMap<Cell, u32>,
    pub warning: Option<String>,
}

impl NeuronPattern {
    fn empty(neuron: usize, warning: String) -> Self {
        Self { neuron, points: Vec::new(), votes: BTreeMap::new(), warning: Some(warning) }
    }

    /// Share of all votes that land in the busiest tenth of occupied cells.
    pub fn compactness(&self) -> f64 {
        let mut v: Vec<u32> = self.votes.values().copied().collect();
        let total: u64 = v.iter().map(|&x| x as u64).sum();
        if total == 0 {
            return 0.0;
        }
        v.sort_unstable_by(|a, b| b.cmp(a));
        let top = v.len().div_ceil(10);
        v[..top].iter().map(|&x| x as u64).sum::<u64>() as f64 / total as f64
    }
}

fn cell_of(p: [f64; 3], size: f64) -> Cell {
    p.map(|v| (v / size).floor() as i64)
}

/// Voxel-aggregated local point sets that drive each neuron the hardest.
///
/// Every trace contributes one candidate per sampled point: its activation and
/// the non-pad neighbors of that point, taken relative to it when `cfg.local`. A neuron whose activation never varies
/// gets an empty pattern with a warning.
pub fn patterns_from_traces<T: Real>(traces: &[StageTrace<T>], cfg: &PatternConfig) -> Result<Vec<NeuronPattern>> {
    if !(cfg.voxel_size > 0.0 && cfg.voxel_size.is_finite()) {
        return Err(config_err!("voxel size must be positive, got {}", cfg.voxel_size));
    }
    if cfg.top_m == 0 || !(cfg.keep_fraction > 0.0 && cfg.keep_fraction <= 1.0) {
        return Err(config_err!("top_m must be >= 1 and keep_fraction in (0, 1]"));
    }
    if traces.is_empty() {
        return Err(arg_err!("no activations to rank"));
    }
    let width = traces[0].output.cols();
    if cfg.neurons > width {
        return Err(config_err!("{} neurons requested, first stage has {width}", cfg.neurons));
    }
    let mut out = Vec::with_capacity(cfg.neurons);
    for neuron in 0..cfg.neurons {
        let mut cands: Vec<(f64, usize, usize)> = Vec::new();
        for (t, tr) in traces.iter().enumerate() {
            for q in 0..tr.output.rows() {
                cands.push((tr.output.get(q, neuron).as_f64(), t, q));
            }
        }
        let (lo, hi) = cands
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c.0), hi.max(c.0)));
        if !(hi > lo) {
            out.push(NeuronPattern::empty(neuron, alloc::format!("neuron {neuron} has constant activation {hi}")));
            continue;
        }
        // stable sort keeps the earlier candidate on ties
        cands.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(core::cmp::Ordering::Equal));
        let mut votes: BTreeMap<Cell, u32> = BTreeMap::new();
        let mut pts: Vec<[f64; 3]> = Vec::new();
        for &(_, t, q) in cands.iter().take(cfg.top_m) {
            let tr = &traces[t];
            let origin = if cfg.local {
                tr.input_positions[tr.queries[q] as usize].map(|v| v.as_f64())
            } else {
                [0.0; 3]
            };
            for j in tr.table.neighbors(q) {
                let a = tr.input_positions[j as usize];
                let p = [0, 1, 2].map(|i| a[i].as_f64() - origin[i]);
                *votes.entry(cell_of(p, cfg.voxel_size)).or_default() += 1;
                pts.push(p);
            }
        }
        let max = votes.values().copied().max().unwrap_or(0);
        let keep = |c: &Cell| votes.get(c).is_some_and(|&v| v as f64 >= cfg.keep_fraction * max as f64);
        let points = pts.into_iter().filter(|p| keep(&cell_of(*p, cfg.voxel_size))).collect();
        out.push(NeuronPattern { neuron, points, votes, warning: None });
    }
    Ok(out)
}

/// Traces the first stage of `model` on every cloud and extracts patterns.
pub fn extract_feature_patterns<T: Real>(
    model: &mut Backbone<T>,
    dataset: &[PointCloud<T>],
    cfg: &PatternConfig,
) -> Result<Vec<NeuronPattern>> {
    if dataset.is_empty() {
        return Err(arg_err!("empty dataset"));
    }
    let traces = dataset
        .iter()
        .map(|c| model.trace_first_stage(&[c]))
        .collect::<Result<Vec<_>>>()?;
    patterns_from_traces(&traces, cfg)
}
