use alloc::vec::Vec;

use rand::Rng;

use super::{SaConfig, SaKind};
use crate::error::{shape_err, Error, Result};
use crate::geometry::{group, scatter_grouped, NeighborTable, Point};
use crate::profiler::{timed, Bucket, Probe};
use crate::reduction::Reducer;
use crate::tensor::{
    backward_stack, forward_stack, relu_backward, relu_in_place, Activation, Layer, Linear, Matrix,
    MlpLayer, Mode, Param,
};
use crate::Real;

/// Points entering a block: coordinates and their current features.
#[derive(Clone, Copy, Debug)]
pub struct SaInput<'a, T = f32> {
    pub positions: &'a [Point<T>],
    pub features: &'a Matrix<T>,
}

#[derive(Clone, Debug, PartialEq)]
struct BlockTape {
    input_rows: usize,
    queries: Vec<u32>,
    table: NeighborTable,
    out_mask: Vec<bool>,
    inner_mask: Option<Vec<bool>>,
}

/// One feature-aggregation block of any of the four variants.
///
/// `forward` takes the input set, the rows of it that act as queries, and a
/// neighbor table. Table indices address the input rows, or the query list
/// when `support_from_subsampled` is set. The result has one row per query.
#[derive(Clone, Debug, PartialEq)]
pub struct SaBlock<T = f32> {
    cfg: SaConfig,
    /// MLPs before pooling (all MLPs for vanilla and pre-conv).
    pub pre: Vec<MlpLayer<T>>,
    pub reducer: Reducer<T>,
    /// MLPs after pooling; the last one has no activation.
    pub post: Vec<MlpLayer<T>>,
    pub shortcut: Option<Linear<T>>,
    tape: Option<BlockTape>,
}

impl<T: Real> SaBlock<T> {
    pub fn new<R: Rng + ?Sized>(cfg: SaConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let pre_widths = cfg.pre_widths();
        let last_pre = pre_widths.len() - 1;
        let pre = pre_widths
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| {
                let act = if i == last_pre && cfg.inner_residual() { Activation::None } else { Activation::Relu };
                MlpLayer::new(a, b, act, rng)
            })
            .collect();
        let post_widths = cfg.post_widths()?;
        let post = post_widths
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| {
                let act = if i + 1 == post_widths.len() { Activation::None } else { Activation::Relu };
                MlpLayer::new(a, b, act, rng)
            })
            .collect();
        let shortcut = cfg.shortcut_widths().map(|(a, b)| Linear::new(a, b, true, rng));
        Ok(Self { cfg, pre, reducer: Reducer::new(cfg.variant.backend), post, shortcut, tape: None })
    }

    pub fn config(&self) -> &SaConfig {
        &self.cfg
    }

    pub fn out_ch(&self) -> usize {
        self.cfg.out_ch
    }

    pub fn forward(
        &mut self,
        input: SaInput<'_, T>,
        queries: &[u32],
        table: &NeighborTable,
        mode: Mode,
        probe: &mut dyn Probe,
    ) -> Result<Matrix<T>> {
        let n = input.positions.len();
        if input.features.shape() != (n, self.cfg.in_ch) {
            return Err(shape_err!(
                "{} block expects {n}x{} input features, got {:?}",
                self.cfg.kind().name(),
                self.cfg.in_ch,
                input.features.shape()
            ));
        }
        if table.rows() != queries.len() {
            return Err(shape_err!("{} neighbor rows for {} queries", table.rows(), queries.len()));
        }
        if queries.iter().any(|&q| q as usize >= n) {
            return Err(shape_err!("query index out of range for {n} input points"));
        }
        let support_len = if self.cfg.support_from_subsampled { queries.len() } else { n };
        if table.max_index().is_some_and(|m| m as usize >= support_len) {
            return Err(shape_err!("neighbor index out of range for {support_len} support points"));
        }
        let table = if self.cfg.support_from_subsampled { table.remap(queries) } else { table.clone() };
        let qpos: Vec<Point<T>> = queries.iter().map(|&q| input.positions[q as usize]).collect();
        let radius = T::of(self.cfg.radius);

        let (out, out_mask, inner_mask) = match self.cfg.kind() {
            SaKind::Vanilla => {
                let grouped = timed(probe, Bucket::Grouping, || -> Result<_> {
                    let g = group(&qpos, input.positions, input.features, &table, radius)?;
                    let x = if self.cfg.use_edge_concat {
                        Matrix::hcat(&[&g.rel_matrix(), &g.features])?
                    } else {
                        g.features.clone()
                    };
                    g.with_features(x)
                })?;
                probe.begin(Bucket::Computation);
                let h = forward_stack(&mut self.pre, &grouped.features, mode)?;
                let out = self.reducer.forward(&grouped.with_features(h)?, mode)?;
                probe.end(Bucket::Computation);
                (out, Vec::new(), None)
            }
            SaKind::PreConv => {
                let h = timed(probe, Bucket::Computation, || forward_stack(&mut self.pre, input.features, mode))?;
                let grouped = timed(probe, Bucket::Grouping, || group(&qpos, input.positions, &h, &table, radius))?;
                let out = timed(probe, Bucket::Computation, || self.reducer.forward(&grouped, mode))?;
                (out, Vec::new(), None)
            }
            SaKind::Separable | SaKind::Assa => {
                probe.begin(Bucket::Computation);
                let mut f_res = forward_stack(&mut self.pre, input.features, mode)?;
                let inner_mask = if self.cfg.inner_residual() {
                    f_res.add_assign(input.features)?;
                    Some(relu_in_place(&mut f_res))
                } else {
                    None
                };
                probe.end(Bucket::Computation);
                let grouped =
                    timed(probe, Bucket::Grouping, || group(&qpos, input.positions, &f_res, &table, radius))?;
                probe.begin(Bucket::Computation);
                let pooled = self.reducer.forward(&grouped, mode)?;
                let mut out = forward_stack(&mut self.post, &pooled, mode)?;
                let res_q = f_res.gather_rows(queries);
                let skip = match &mut self.shortcut {
                    Some(lin) => lin.forward(&res_q, mode)?,
                    None => res_q,
                };
                out.add_assign(&skip)?;
                let mask = relu_in_place(&mut out);
                probe.end(Bucket::Computation);
                (out, mask, inner_mask)
            }
        };

        self.tape = (mode == Mode::Train).then(|| BlockTape {
            input_rows: n,
            queries: queries.to_vec(),
            table,
            out_mask,
            inner_mask,
        });
        Ok(out)
    }

    /// Accumulates parameter gradients and returns the gradient of the input features.
    pub fn backward(&mut self, upstream: &Matrix<T>) -> Result<Matrix<T>> {
        let tape = self.tape.take().ok_or(Error::Tape("set abstraction block"))?;
        if upstream.shape() != (tape.queries.len(), self.cfg.out_ch) {
            return Err(shape_err!("block upstream {:?}", upstream.shape()));
        }
        let n = tape.input_rows;
        match self.cfg.kind() {
            SaKind::Vanilla => {
                let dh = self.reducer.backward(upstream)?;
                let dx = backward_stack(&mut self.pre, &dh)?;
                let dx = if self.cfg.use_edge_concat {
                    dx.split_cols(&[3, self.cfg.in_ch])?.pop().expect("two parts")
                } else {
                    dx
                };
                Ok(scatter_grouped(&tape.table, &dx, n))
            }
            SaKind::PreConv => {
                let dg = self.reducer.backward(upstream)?;
                let dh = scatter_grouped(&tape.table, &dg, n);
                backward_stack(&mut self.pre, &dh)
            }
            SaKind::Separable | SaKind::Assa => {
                let dsum = relu_backward(upstream, &tape.out_mask);
                let dpooled = backward_stack(&mut self.post, &dsum)?;
                let dgrouped = self.reducer.backward(&dpooled)?;
                let mut dres = scatter_grouped(&tape.table, &dgrouped, n);
                let dskip = match &mut self.shortcut {
                    Some(lin) => lin.backward(&dsum)?,
                    None => dsum,
                };
                dres.scatter_add_rows(&tape.queries, &dskip);
                match &tape.inner_mask {
                    Some(mask) => {
                        let dpre = relu_backward(&dres, mask);
                        let mut dx = backward_stack(&mut self.pre, &dpre)?;
                        dx.add_assign(&dpre)?;
                        Ok(dx)
                    }
                    None => backward_stack(&mut self.pre, &dres),
                }
            }
        }
    }
}

impl<T: Real> Layer<T> for SaBlock<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        self.pre.visit_params(f);
        self.post.visit_params(f);
        self.shortcut.visit_params(f);
    }

    fn visit_buffers(&mut self, f: &mut dyn FnMut(&mut Vec<T>)) {
        self.pre.visit_buffers(f);
        self.post.visit_buffers(f);
    }
}
