//! Wall-clock latency split into subsampling, grouping and computation.

use std::io::Write;
use std::time::{Duration, Instant};

use anyhow::{bail, Result};
use assa_core::geometry::{ball_query, farthest_point_sample, PointCloud};
use assa_core::profiler::{timed, Bucket, Probe};
use assa_core::sa::{SaBlock, SaConfig, SaInput, SaKind};
use assa_core::tensor::{Matrix, Mode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_RUNS: usize = 200;
pub const DEFAULT_WARMUP: usize = 10;
pub const MIN_RUNS: usize = 10;
/// Below this many clock ticks per run a bucket mean is flagged as unreliable.
pub const MIN_TICKS: u32 = 10;

/// Accumulates elapsed time per bucket. Nested `begin` calls of the same bucket are ignored.
#[derive(Debug, Default)]
pub struct TimingProbe {
    started: [Option<Instant>; 3],
    depth: [u32; 3],
    pub elapsed: [Duration; 3],
}

fn slot(b: Bucket) -> usize {
    Bucket::ALL.iter().position(|&x| x == b).expect("listed bucket")
}

impl TimingProbe {
    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

impl Probe for TimingProbe {
    fn begin(&mut self, bucket: Bucket) {
        let i = slot(bucket);
        if self.depth[i] == 0 {
            self.started[i] = Some(Instant::now());
        }
        self.depth[i] += 1;
    }

    fn end(&mut self, bucket: Bucket) {
        let i = slot(bucket);
        self.depth[i] = self.depth[i].saturating_sub(1);
        if self.depth[i] == 0 {
            if let Some(t) = self.started[i].take() {
                self.elapsed[i] += t.elapsed();
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Stats {
    pub mean_us: f64,
    pub p50_us: f64,
    pub p95_us: f64,
    pub min_us: f64,
    pub max_us: f64,
}

impl Stats {
    pub fn of(samples_us: &[f64]) -> Self {
        if samples_us.is_empty() {
            return Self::default();
        }
        let mut s = samples_us.to_vec();
        s.sort_by(f64::total_cmp);
        // nearest-rank percentile
        let pct = |p: f64| s[((p * s.len() as f64).ceil() as usize).clamp(1, s.len()) - 1];
        Self {
            mean_us: s.iter().sum::<f64>() / s.len() as f64,
            p50_us: pct(0.5),
            p95_us: pct(0.95),
            min_us: s[0],
            max_us: s[s.len() - 1],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatencyReport {
    pub input_size: usize,
    pub runs: usize,
    pub warmup: usize,
    pub threads: usize,
    /// Indexed like `Bucket::ALL`.
    pub buckets: [Stats; 3],
    /// End-to-end time of each run.
    pub total: Stats,
    pub notes: Vec<String>,
}

impl LatencyReport {
    pub fn bucket(&self, b: Bucket) -> &Stats {
        &self.buckets[slot(b)]
    }

    pub fn bucket_mean_sum(&self) -> f64 {
        self.buckets.iter().map(|s| s.mean_us).sum()
    }
}

/// Something whose bucketed work can be timed at a given input size.
pub trait LatencyRunner {
    /// Called once per size before any timed run.
    fn prepare(&mut self, _n: usize) -> Result<()> {
        Ok(())
    }
    fn run(&mut self, n: usize, probe: &mut dyn Probe) -> Result<()>;
}

impl<F: FnMut(usize, &mut dyn Probe) -> Result<()>> LatencyRunner for F {
    fn run(&mut self, n: usize, probe: &mut dyn Probe) -> Result<()> {
        self(n, probe)
    }
}

fn clock_tick() -> Duration {
    let mut best = Duration::MAX;
    for _ in 0..64 {
        let a = Instant::now();
        let mut b = Instant::now();
        while b == a {
            b = Instant::now();
        }
        best = best.min(b - a);
    }
    best
}

pub fn measure_latency(
    runner: &mut dyn LatencyRunner,
    sizes: &[usize],
    runs: usize,
    warmup: usize,
) -> Result<Vec<LatencyReport>> {
    if runs < MIN_RUNS {
        bail!("at least {MIN_RUNS} runs are needed, got {runs}");
    }
    let tick = clock_tick();
    let mut out = Vec::with_capacity(sizes.len());
    for &n in sizes {
        runner.prepare(n)?;
        let mut probe = TimingProbe::default();
        for _ in 0..warmup {
            runner.run(n, &mut probe)?;
        }
        let mut samples: [Vec<f64>; 3] = Default::default();
        let mut totals = Vec::with_capacity(runs);
        for _ in 0..runs {
            probe.reset();
            let t = Instant::now();
            runner.run(n, &mut probe)?;
            totals.push(t.elapsed().as_secs_f64() * 1e6);
            for (s, e) in samples.iter_mut().zip(probe.elapsed) {
                s.push(e.as_secs_f64() * 1e6);
            }
        }
        let buckets = [Stats::of(&samples[0]), Stats::of(&samples[1]), Stats::of(&samples[2])];
        let floor_us = (tick * MIN_TICKS).as_secs_f64() * 1e6;
        let notes = Bucket::ALL
            .iter()
            .zip(&buckets)
            .filter(|(_, s)| s.mean_us > 0.0 && s.mean_us < floor_us)
            .map(|(b, s)| format!("{} mean {:.3}us is under {MIN_TICKS} clock ticks", b.name(), s.mean_us))
            .collect();
        out.push(LatencyReport {
            input_size: n,
            runs,
            warmup,
            threads: 1,
            buckets,
            total: Stats::of(&totals),
            notes,
        });
    }
    Ok(out)
}

pub const CSV_HEADER: &str = "bucket,input_size,mean_us,p50_us,p95_us,runs,threads";

/// One row per bucket and report.
pub fn write_csv<W: Write>(mut w: W, reports: &[LatencyReport]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in reports {
        for (b, s) in Bucket::ALL.iter().zip(&r.buckets) {
            writeln!(
                w,
                "{},{},{:.3},{:.3},{:.3},{},{}",
                b.name(),
                r.input_size,
                s.mean_us,
                s.p50_us,
                s.p95_us,
                r.runs,
                r.threads
            )?;
        }
    }
    Ok(())
}

/// One set-abstraction module: FPS to a quarter of the points, ball query,
/// then one block. Inputs are uniform in the unit cube with random features.
#[derive(Clone, Debug, PartialEq)]
pub struct SaBench {
    pub kind: SaKind,
    pub width: usize,
    pub k: usize,
    pub mlp_layers: usize,
    pub radius: f64,
    pub ratio: f64,
    pub seed: u64,
    cached: Option<(usize, PointCloud<f32>, SaBlock<f32>)>,
}

impl SaBench {
    /// `C = 64` in and out, `K = 32`, `L = 3`, radius 0.2.
    pub fn new(kind: SaKind) -> Self {
        Self { kind, width: 64, k: 32, mlp_layers: 3, radius: 0.2, ratio: 0.25, seed: 0, cached: None }
    }

    pub fn block_config(&self) -> SaConfig {
        SaConfig {
            mlp_layers: self.mlp_layers,
            radius: self.radius,
            k: self.k,
            ..SaConfig::new(self.kind, self.width, self.width)
        }
    }
}

impl LatencyRunner for SaBench {
    fn prepare(&mut self, n: usize) -> Result<()> {
        if self.cached.as_ref().is_some_and(|c| c.0 == n) {
            return Ok(());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let positions = (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
        let features = Matrix::from_fn(n, self.width, |_, _| rng.random_range(-1.0f32..1.0));
        let cloud = PointCloud::new(positions, features, None)?;
        let block = SaBlock::new(self.block_config(), &mut rng)?;
        self.cached = Some((n, cloud, block));
        Ok(())
    }

    fn run(&mut self, n: usize, probe: &mut dyn Probe) -> Result<()> {
        self.prepare(n)?;
        let ratio = self.ratio;
        let (_, cloud, block) = self.cached.as_mut().expect("prepared");
        let m = ((n as f64 * ratio) as usize).max(1);
        let queries = timed(probe, Bucket::Subsampling, || farthest_point_sample(cloud.positions(), m, 0))?;
        let cfg = *block.config();
        let table = timed(probe, Bucket::Grouping, || {
            let qpos: Vec<_> = queries.iter().map(|&q| cloud.positions()[q as usize]).collect();
            ball_query(&qpos, cloud.positions(), cfg.radius as f32, cfg.k)
        })?;
        let input = SaInput { positions: cloud.positions(), features: cloud.features() };
        std::hint::black_box(block.forward(input, &queries, &table, Mode::Eval, probe)?);
        Ok(())
    }
}
