//! Neighborhood reductions over the `k` axis of a [`GroupedTensor`].
//!
//! Every backend is expressed as a list of channel segments. A segment copies
//! a run of input channels, scales each neighbor's copy by one per-neighbor
//! weight (`1`, `dx`, `dy`, `dz` or `dx + dy + dz`, with deltas already divided
//! by the radius) and pools over the neighbors:
//!
//! | backend      | segments                                    | width |
//! |--------------|---------------------------------------------|-------|
//! | isotropic    | `1 · f[0..C]`                               | `C`   |
//! | anisotropic  | `dx · f[0..C]`, `dy · f[0..C]`, `dz · f[0..C]` | `3C`  |
//! | pospool      | `dx · f[g0]`, `dy · f[g1]`, `dz · f[g2]`     | `C`   |
//! | relpos-sum   | `(dx+dy+dz) · f[0..C]`                       | `C`   |
//!
//! The anisotropic concatenation order is x, y, z; checkpoints depend on it.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{config_err, shape_err, Error, Result};
use crate::geometry::{GroupedTensor, Point};
use crate::tensor::{Matrix, Mode};
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReductionMode {
    Max,
    Mean,
    Sum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AnisoConfig {
    pub base_reduction: ReductionMode,
    pub include_pads: bool,
}

impl Default for AnisoConfig {
    fn default() -> Self {
        Self { base_reduction: ReductionMode::Max, include_pads: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReductionBackend {
    Isotropic(ReductionMode),
    Anisotropic(AnisoConfig),
    /// Channel thirds scaled by x, y and z respectively.
    PosPool(ReductionMode),
    /// Every channel scaled by `dx + dy + dz`.
    RelPosSum(ReductionMode),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Weight {
    One,
    Axis(usize),
    AxisSum,
}

#[derive(Clone, Copy, Debug)]
struct Segment {
    weight: Weight,
    src: usize,
    len: usize,
}

impl ReductionBackend {
    pub fn mode(&self) -> ReductionMode {
        match *self {
            Self::Isotropic(m) | Self::PosPool(m) | Self::RelPosSum(m) => m,
            Self::Anisotropic(cfg) => cfg.base_reduction,
        }
    }

    pub fn include_pads(&self) -> bool {
        match self {
            Self::Anisotropic(cfg) => cfg.include_pads,
            _ => true,
        }
    }

    /// True when the backend reads relative positions.
    pub fn is_geometric(&self) -> bool {
        !matches!(self, Self::Isotropic(_))
    }

    pub fn output_width(&self, channels: usize) -> Result<usize> {
        Ok(self.segments(channels)?.iter().map(|s| s.len).sum())
    }

    fn segments(&self, c: usize) -> Result<Vec<Segment>> {
        Ok(match self {
            Self::Isotropic(_) => vec![Segment { weight: Weight::One, src: 0, len: c }],
            Self::RelPosSum(_) => vec![Segment { weight: Weight::AxisSum, src: 0, len: c }],
            Self::Anisotropic(_) => (0..3)
                .map(|a| Segment { weight: Weight::Axis(a), src: 0, len: c })
                .collect(),
            Self::PosPool(_) => {
                if c < 3 {
                    return Err(config_err!("pospool needs at least 3 channels, got {c}"));
                }
                let sizes = pospool_groups(c);
                let mut src = 0;
                sizes
                    .iter()
                    .enumerate()
                    .map(|(a, &len)| {
                        let s = Segment { weight: Weight::Axis(a), src, len };
                        src += len;
                        s
                    })
                    .collect()
            }
        })
    }
}

/// Contiguous channel thirds, remainder going to the earlier groups.
pub fn pospool_groups(c: usize) -> [usize; 3] {
    let (q, r) = (c / 3, c % 3);
    [q + (r > 0) as usize, q + (r > 1) as usize, q]
}

#[inline]
fn weight_of<T: Real>(w: Weight, rel: &Point<T>) -> T {
    match w {
        Weight::One => T::one(),
        Weight::Axis(a) => rel[a],
        Weight::AxisSum => rel[0] + rel[1] + rel[2],
    }
}

#[derive(Clone, Debug, PartialEq)]
struct ReduceTape<T> {
    k: usize,
    in_ch: usize,
    rel: Vec<Point<T>>,
    pad: Vec<bool>,
    /// Winning slot per (query, output channel) for max mode.
    argmax: Vec<u32>,
    /// Included slot count per query.
    counts: Vec<u32>,
}

/// A reduction layer with a backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Reducer<T = f32> {
    pub backend: ReductionBackend,
    tape: Option<ReduceTape<T>>,
}

impl<T: Real> Reducer<T> {
    pub fn new(backend: ReductionBackend) -> Self {
        Self { backend, tape: None }
    }

    pub fn forward(&mut self, grouped: &GroupedTensor<T>, mode: Mode) -> Result<Matrix<T>> {
        let k = grouped.k;
        let c = grouped.channels();
        let rows = grouped.features.rows();
        if k == 0 || !rows.is_multiple_of(k) || grouped.rel_positions.len() != rows || grouped.pad.len() != rows {
            return Err(shape_err!("malformed grouped tensor with k={k} and {rows} rows"));
        }
        let segs = self.backend.segments(c)?;
        let width: usize = segs.iter().map(|s| s.len).sum();
        let m = rows / k;
        let red = self.backend.mode();
        let include_pads = self.backend.include_pads();
        let mut out = Matrix::zeros(m, width);
        let mut argmax = if red == ReductionMode::Max { vec![0u32; m * width] } else { Vec::new() };
        let mut counts = Vec::with_capacity(m);
        let f = &grouped.features;

        for i in 0..m {
            let slots = (i * k..(i + 1) * k).filter(|&s| include_pads || !grouped.pad[s]);
            let orow = out.row_mut(i);
            let mut seen = 0u32;
            for s in slots {
                let rel = &grouped.rel_positions[s];
                let frow = f.row(s);
                let mut off = 0;
                for seg in &segs {
                    let w = weight_of(seg.weight, rel);
                    let src = &frow[seg.src..seg.src + seg.len];
                    let dst = &mut orow[off..off + seg.len];
                    match red {
                        ReductionMode::Sum | ReductionMode::Mean => {
                            for (d, &v) in dst.iter_mut().zip(src) {
                                *d += w * v;
                            }
                        }
                        ReductionMode::Max => {
                            let am = &mut argmax[i * width + off..i * width + off + seg.len];
                            for ((d, &v), a) in dst.iter_mut().zip(src).zip(am) {
                                let e = w * v;
                                if seen == 0 || e > *d {
                                    *d = e;
                                    *a = (s - i * k) as u32;
                                }
                            }
                        }
                    }
                    off += seg.len;
                }
                seen += 1;
            }
            if red == ReductionMode::Mean {
                let inv = T::one() / T::of(seen as f64);
                orow.iter_mut().for_each(|v| *v *= inv);
            }
            counts.push(seen);
        }

        self.tape = (mode == Mode::Train).then(|| ReduceTape {
            k,
            in_ch: c,
            rel: grouped.rel_positions.clone(),
            pad: grouped.pad.clone(),
            argmax,
            counts,
        });
        Ok(out)
    }

    /// Gradient with respect to the grouped features, `(m*k) x C`.
    pub fn backward(&mut self, upstream: &Matrix<T>) -> Result<Matrix<T>> {
        let tape = self.tape.take().ok_or(Error::Tape("reduction"))?;
        let segs = self.backend.segments(tape.in_ch)?;
        let width: usize = segs.iter().map(|s| s.len).sum();
        let k = tape.k;
        let m = tape.rel.len() / k;
        if upstream.shape() != (m, width) {
            return Err(shape_err!("reduction upstream {:?}, expected {m}x{width}", upstream.shape()));
        }
        let include_pads = self.backend.include_pads();
        let mut grad = Matrix::zeros(m * k, tape.in_ch);
        match self.backend.mode() {
            ReductionMode::Max => {
                for i in 0..m {
                    let up = upstream.row(i);
                    let mut off = 0;
                    for seg in &segs {
                        for c in 0..seg.len {
                            let s = i * k + tape.argmax[i * width + off + c] as usize;
                            let w = weight_of(seg.weight, &tape.rel[s]);
                            let g = grad.row_mut(s);
                            g[seg.src + c] += w * up[off + c];
                        }
                        off += seg.len;
                    }
                }
            }
            red => {
                for i in 0..m {
                    let up = upstream.row(i);
                    let scale = match red {
                        ReductionMode::Mean => T::one() / T::of(tape.counts[i] as f64),
                        _ => T::one(),
                    };
                    for s in i * k..(i + 1) * k {
                        if !include_pads && tape.pad[s] {
                            continue;
                        }
                        let g = grad.row_mut(s);
                        let mut off = 0;
                        for seg in &segs {
                            let w = weight_of(seg.weight, &tape.rel[s]) * scale;
                            for c in 0..seg.len {
                                g[seg.src + c] += w * up[off + c];
                            }
                            off += seg.len;
                        }
                    }
                }
            }
        }
        Ok(grad)
    }
}

fn run<T: Real>(grouped: &GroupedTensor<T>, backend: ReductionBackend) -> Result<Matrix<T>> {
    Reducer::new(backend).forward(grouped, Mode::Eval)
}

/// Isotropic max / mean / sum over the neighbor axis (pads included).
pub fn reduce<T: Real>(grouped: &GroupedTensor<T>, mode: ReductionMode) -> Result<Matrix<T>> {
    run(grouped, ReductionBackend::Isotropic(mode))
}

/// Scales each neighbor's features by `dx`, `dy`, `dz`, concatenates the three
/// copies (`3C` channels) and pools with `cfg.base_reduction`.
pub fn anisotropic_reduce<T: Real>(grouped: &GroupedTensor<T>, cfg: AnisoConfig) -> Result<Matrix<T>> {
    run(grouped, ReductionBackend::Anisotropic(cfg))
}

pub fn pospool_reduce<T: Real>(grouped: &GroupedTensor<T>, mode: ReductionMode) -> Result<Matrix<T>> {
    run(grouped, ReductionBackend::PosPool(mode))
}

pub fn relpos_sum_reduce<T: Real>(grouped: &GroupedTensor<T>, mode: ReductionMode) -> Result<Matrix<T>> {
    run(grouped, ReductionBackend::RelPosSum(mode))
}
