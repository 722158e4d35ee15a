//! Randomized check that pre-conv and vanilla blocks agree when they share weights.

use anyhow::Result;
use assa_core::geometry::{ball_query, farthest_point_sample, Point};
use assa_core::profiler::NoProbe;
use assa_core::sa::{SaBlock, SaConfig, SaInput, SaKind};
use assa_core::tensor::{Layer, Linear, Matrix, Mode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOLERANCE: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Instance {
    pub seed: u64,
    pub n: usize,
    pub queries: usize,
    pub in_ch: usize,
    pub out_ch: usize,
    pub k: usize,
    pub mlp_layers: usize,
    pub radius: f64,
    pub max_abs_diff: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquivReport {
    pub instances: Vec<Instance>,
}

impl EquivReport {
    pub fn max_abs_diff(&self) -> f64 {
        self.instances.iter().map(|i| i.max_abs_diff).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&Instance> {
        self.instances.iter().max_by(|a, b| a.max_abs_diff.total_cmp(&b.max_abs_diff))
    }

    pub fn passed(&self) -> bool {
        self.max_abs_diff() <= TOLERANCE
    }
}

fn randomize_norm_state<R: Rng>(block: &mut SaBlock<f32>, rng: &mut R) {
    block.visit_buffers(&mut |b| {
        // means and variances alike, so variances stay positive
        for v in b.iter_mut() {
            *v = rng.random_range(0.2f32..1.5);
        }
    });
    for layer in &mut block.pre {
        if let Some(bn) = &mut layer.bn {
            for v in bn.gamma.value.as_mut_slice() {
                *v = rng.random_range(0.5f32..1.5);
            }
            for v in bn.beta.value.as_mut_slice() {
                *v = rng.random_range(-0.5f32..0.5);
            }
        }
    }
}

/// One instance: sizes drawn with `N <= 64`, `C <= 32`, `K <= 16`, `L <= 3`.
/// With `edge_concat` the vanilla block also sees neighbor offsets and the
/// pre-conv block gets the same weights minus the offset columns.
pub fn run_instance(seed: u64, edge_concat: bool) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(4..=64usize);
    let queries = rng.random_range(1..=n);
    let in_ch = rng.random_range(1..=32usize);
    let out_ch = rng.random_range(1..=32usize);
    let k = rng.random_range(1..=16usize);
    let mlp_layers = rng.random_range(1..=3usize);
    let radius = rng.random_range(0.1..0.6);

    let positions: Vec<Point<f32>> = (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    let features = Matrix::from_fn(n, in_ch, |_, _| rng.random_range(-1.0f32..1.0));

    let base = SaConfig { mlp_layers, radius, k, ..SaConfig::new(SaKind::Vanilla, in_ch, out_ch) };
    let vcfg = SaConfig { use_edge_concat: edge_concat, ..base };
    let mut vanilla = SaBlock::<f32>::new(vcfg, &mut rng)?;
    randomize_norm_state(&mut vanilla, &mut rng);

    let pcfg = SaConfig { use_edge_concat: false, ..SaConfig::new(SaKind::PreConv, in_ch, out_ch) };
    let pcfg = SaConfig { mlp_layers, radius, k, ..pcfg };
    let mut preconv = SaBlock::<f32>::new(pcfg, &mut rng)?;
    preconv.pre = vanilla.pre.clone();
    if edge_concat {
        let first = &vanilla.pre[0].linear;
        let w = first.weight.value.split_cols(&[3, in_ch])?.pop().expect("two parts");
        let b = first.bias.as_ref().map(|b| b.value.clone());
        preconv.pre[0].linear = Linear::from_parts(w, b)?;
    }

    let q = farthest_point_sample(&positions, queries, 0)?;
    let qpos: Vec<Point<f32>> = q.iter().map(|&i| positions[i as usize]).collect();
    let table = ball_query(&qpos, &positions, radius as f32, k)?;
    let input = SaInput { positions: &positions, features: &features };
    let a = vanilla.forward(input, &q, &table, Mode::Eval, &mut NoProbe)?;
    let b = preconv.forward(input, &q, &table, Mode::Eval, &mut NoProbe)?;
    Ok(Instance {
        seed,
        n,
        queries,
        in_ch,
        out_ch,
        k,
        mlp_layers,
        radius,
        max_abs_diff: a.max_abs_diff(&b).into(),
    })
}

/// Instances `base_seed .. base_seed + count`.
pub fn run_suite(count: usize, base_seed: u64, edge_concat: bool) -> Result<EquivReport> {
    let instances = (0..count as u64)
        .map(|i| run_instance(base_seed.wrapping_add(i), edge_concat))
        .collect::<Result<_>>()?;
    Ok(EquivReport { instances })
}
