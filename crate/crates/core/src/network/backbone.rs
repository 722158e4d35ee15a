use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{BackboneConfig, STAGES};
use crate::error::{arg_err, shape_err, Error, Result};
use crate::geometry::{ball_query, farthest_point_sample, NeighborTable, Point, PointCloud};
use crate::profiler::{timed, Bucket, NoProbe, Probe};
use crate::sa::{SaBlock, SaInput};
use crate::tensor::{relu_backward, relu_in_place, Layer, Linear, Matrix, Mode, Param};
use crate::Real;

/// Points of several clouds stacked row-wise; `segments[i]` is cloud `i`'s row range.
#[derive(Clone, Debug)]
struct Stacked<T> {
    positions: Vec<Point<T>>,
    features: Matrix<T>,
    segments: Vec<(usize, usize)>,
}

/// What one stage saw: the sampled rows and the first block's neighbor table.
#[derive(Clone, Debug)]
pub struct StageTrace<T = f32> {
    /// Input rows the stage sampled, as global indices into the stacked input.
    pub queries: Vec<u32>,
    /// First-block neighbors of every sampled point (global input rows).
    pub table: NeighborTable,
    pub input_positions: Vec<Point<T>>,
    pub output: Matrix<T>,
    pub segments: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
struct Stage<T> {
    blocks: Vec<SaBlock<T>>,
    uniform: bool,
}

impl<T: Real> Stage<T> {
    fn backward(&mut self, upstream: &Matrix<T>) -> Result<Matrix<T>> {
        let d = self.blocks.len();
        if self.uniform {
            let widths: Vec<usize> = self.blocks.iter().map(|b| b.out_ch()).collect();
            let mut parts = upstream.split_cols(&widths)?;
            let mut g = parts.pop().expect("depth >= 1");
            for b in (1..d).rev() {
                let dprev = self.blocks[b].backward(&g)?;
                g = parts.pop().expect("one part per block");
                g.add_assign(&dprev)?;
            }
            self.blocks[0].backward(&g)
        } else {
            let mut g = upstream.clone();
            for b in self.blocks.iter_mut().rev() {
                g = b.backward(&g)?;
            }
            Ok(g)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct PoolTape {
    rows: usize,
    argmax: Vec<u32>,
    hidden_mask: Vec<bool>,
}

/// Four set-abstraction stages, global max pooling and a two-layer classifier head.
#[derive(Clone, Debug, PartialEq)]
pub struct Backbone<T = f32> {
    cfg: BackboneConfig,
    stages: Vec<Stage<T>>,
    pub head_hidden: Linear<T>,
    pub head_out: Linear<T>,
    tape: Option<PoolTape>,
}

impl<T: Real> Backbone<T> {
    /// Fan-in uniform init from `seed`; the output layer of the head starts at zero.
    pub fn new(cfg: BackboneConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut stages = Vec::with_capacity(STAGES);
        for s in 0..STAGES {
            let blocks = cfg
                .block_configs(s)
                .into_iter()
                .map(|c| SaBlock::new(c, &mut rng))
                .collect::<Result<_>>()?;
            stages.push(Stage { blocks, uniform: cfg.uniform_block_width });
        }
        let head_hidden = Linear::new(cfg.feature_width(), cfg.head_hidden, true, &mut rng);
        let head_out = Linear::zeroed(cfg.head_hidden, cfg.num_classes, true);
        Ok(Self { cfg, stages, head_hidden, head_out, tape: None })
    }

    pub fn config(&self) -> &BackboneConfig {
        &self.cfg
    }

    pub fn blocks(&self) -> impl Iterator<Item = &SaBlock<T>> {
        self.stages.iter().flat_map(|s| s.blocks.iter())
    }

    pub fn blocks_mut(&mut self) -> impl Iterator<Item = &mut SaBlock<T>> {
        self.stages.iter_mut().flat_map(|s| s.blocks.iter_mut())
    }

    /// Class logits, one row per cloud.
    pub fn forward(&mut self, clouds: &[&PointCloud<T>], mode: Mode) -> Result<Matrix<T>> {
        self.forward_probed(clouds, mode, &mut NoProbe)
    }

    pub fn forward_probed(
        &mut self,
        clouds: &[&PointCloud<T>],
        mode: Mode,
        probe: &mut dyn Probe,
    ) -> Result<Matrix<T>> {
        let pooled = self.encode(clouds, mode, probe, None)?;
        self.head(pooled, mode)
    }

    /// Runs the encoder and records what the first stage did.
    pub fn trace_first_stage(&mut self, clouds: &[&PointCloud<T>]) -> Result<StageTrace<T>> {
        let mut trace = None;
        self.encode(clouds, Mode::Eval, &mut NoProbe, Some(&mut trace))?;
        trace.ok_or(Error::Tape("first stage trace"))
    }

    fn stack(&self, clouds: &[&PointCloud<T>]) -> Result<Stacked<T>> {
        if clouds.is_empty() {
            return Err(arg_err!("empty batch"));
        }
        let min = self.cfg.min_points();
        let mut positions = Vec::new();
        let mut rows: Vec<&[T]> = Vec::new();
        let mut segments = Vec::with_capacity(clouds.len());
        for (i, c) in clouds.iter().enumerate() {
            if c.len() < min {
                return Err(arg_err!("cloud {i} has {} points; the backbone needs at least {min}", c.len()));
            }
            if c.channels() != self.cfg.in_features {
                return Err(shape_err!(
                    "cloud {i} has {} feature channels, expected {}",
                    c.channels(),
                    self.cfg.in_features
                ));
            }
            segments.push((positions.len(), c.len()));
            positions.extend_from_slice(c.positions());
            rows.extend((0..c.len()).map(|r| c.features().row(r)));
        }
        let features = Matrix::from_rows(&rows)?;
        Ok(Stacked { positions, features, segments })
    }

    fn encode(
        &mut self,
        clouds: &[&PointCloud<T>],
        mode: Mode,
        probe: &mut dyn Probe,
        mut trace: Option<&mut Option<StageTrace<T>>>,
    ) -> Result<Matrix<T>> {
        let mut cur = self.stack(clouds)?;
        let ratio = self.cfg.stage_subsample_ratio;
        for (s, stage) in self.stages.iter_mut().enumerate() {
            let radius = T::of(self.cfg.stage_radii[s]);
            let k = self.cfg.stage_k[s];

            let (queries, segments) = timed(probe, Bucket::Subsampling, || -> Result<_> {
                let mut queries = Vec::new();
                let mut segments = Vec::with_capacity(cur.segments.len());
                for &(start, len) in &cur.segments {
                    let m = ((len as f64 * ratio) as usize).max(1);
                    let local = farthest_point_sample(&cur.positions[start..start + len], m, 0)?;
                    segments.push((queries.len(), m));
                    queries.extend(local.into_iter().map(|q| q + start as u32));
                }
                Ok((queries, segments))
            })?;
            let sampled: Vec<Point<T>> = queries.iter().map(|&q| cur.positions[q as usize]).collect();

            let first_cfg = *stage.blocks[0].config();
            let (first_table, later_table) = timed(probe, Bucket::Grouping, || -> Result<_> {
                let mut first = Vec::with_capacity(segments.len());
                let mut first_off = Vec::with_capacity(segments.len());
                let mut later = Vec::with_capacity(segments.len());
                let mut later_off = Vec::with_capacity(segments.len());
                for (&(start, len), &(qs, m)) in cur.segments.iter().zip(&segments) {
                    let qpos = &sampled[qs..qs + m];
                    let within_sampled = ball_query(qpos, qpos, radius, k)?;
                    if first_cfg.support_from_subsampled {
                        first.push(within_sampled.clone());
                        first_off.push(qs as u32);
                    } else {
                        first.push(ball_query(qpos, &cur.positions[start..start + len], radius, k)?);
                        first_off.push(start as u32);
                    }
                    later.push(within_sampled);
                    later_off.push(qs as u32);
                }
                Ok((NeighborTable::concat(&first, &first_off)?, NeighborTable::concat(&later, &later_off)?))
            })?;

            let input = SaInput { positions: &cur.positions, features: &cur.features };
            let first_out = stage.blocks[0].forward(input, &queries, &first_table, mode, probe)?;

            if s == 0 {
                if let Some(slot) = trace.as_deref_mut() {
                    let table = if first_cfg.support_from_subsampled {
                        first_table.remap(&queries)
                    } else {
                        first_table.clone()
                    };
                    *slot = Some(StageTrace {
                        queries: queries.clone(),
                        table,
                        input_positions: cur.positions.clone(),
                        output: Matrix::zeros(0, 0),
                        segments: cur.segments.clone(),
                    });
                }
            }

            let identity: Vec<u32> = (0..queries.len() as u32).collect();
            let mut outputs = vec![first_out];
            for b in 1..stage.blocks.len() {
                let prev = outputs.last().expect("non-empty");
                let input = SaInput { positions: &sampled, features: prev };
                let out = stage.blocks[b].forward(input, &identity, &later_table, mode, probe)?;
                outputs.push(out);
            }
            let features = if stage.uniform {
                let refs: Vec<&Matrix<T>> = outputs.iter().collect();
                timed(probe, Bucket::Computation, || Matrix::hcat(&refs))?
            } else {
                outputs.pop().expect("non-empty")
            };
            if s == 0 {
                if let Some(Some(t)) = trace.as_deref_mut() {
                    t.output = features.clone();
                }
            }
            cur = Stacked { positions: sampled, features, segments };
        }

        // global max pool per cloud
        probe.begin(Bucket::Computation);
        let w = cur.features.cols();
        let b = cur.segments.len();
        let mut pooled = Matrix::zeros(b, w);
        let mut argmax = vec![0u32; b * w];
        for (i, &(start, len)) in cur.segments.iter().enumerate() {
            let out = pooled.row_mut(i);
            out.copy_from_slice(cur.features.row(start));
            let am = &mut argmax[i * w..(i + 1) * w];
            am.iter_mut().for_each(|a| *a = start as u32);
            for r in start + 1..start + len {
                for ((o, a), &v) in out.iter_mut().zip(am.iter_mut()).zip(cur.features.row(r)) {
                    if v > *o {
                        *o = v;
                        *a = r as u32;
                    }
                }
            }
        }
        probe.end(Bucket::Computation);
        self.tape = (mode == Mode::Train).then(|| PoolTape {
            rows: cur.features.rows(),
            argmax,
            hidden_mask: Vec::new(),
        });
        Ok(pooled)
    }

    fn head(&mut self, pooled: Matrix<T>, mode: Mode) -> Result<Matrix<T>> {
        let mut hidden = self.head_hidden.forward(&pooled, mode)?;
        let mask = relu_in_place(&mut hidden);
        if let Some(t) = &mut self.tape {
            t.hidden_mask = mask;
        }
        self.head_out.forward(&hidden, mode)
    }

    /// Backpropagates `dL/dlogits` through the whole network, accumulating parameter gradients.
    pub fn backward(&mut self, dlogits: &Matrix<T>) -> Result<()> {
        let tape = self.tape.take().ok_or(Error::Tape("backbone"))?;
        let dhidden = self.head_out.backward(dlogits)?;
        let dhidden = relu_backward(&dhidden, &tape.hidden_mask);
        let dpooled = self.head_hidden.backward(&dhidden)?;
        let w = dpooled.cols();
        let mut g = Matrix::zeros(tape.rows, w);
        for i in 0..dpooled.rows() {
            for c in 0..w {
                let r = tape.argmax[i * w + c] as usize;
                let v = g.get(r, c) + dpooled.get(i, c);
                g.set(r, c, v);
            }
        }
        for stage in self.stages.iter_mut().rev() {
            g = stage.backward(&g)?;
        }
        Ok(())
    }
}

impl<T: Real> Layer<T> for Backbone<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        for b in self.blocks_mut() {
            b.visit_params(f);
        }
        self.head_hidden.visit_params(f);
        self.head_out.visit_params(f);
    }

    fn visit_buffers(&mut self, f: &mut dyn FnMut(&mut Vec<T>)) {
        for b in self.blocks_mut() {
            b.visit_buffers(f);
        }
    }
}
