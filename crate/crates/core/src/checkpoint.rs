//! Binary model snapshots.
//!
//! Layout, little endian: the magic `ASSACKPT`, a `u32` version, the backbone
//! configuration, a `u32` tensor count, then every tensor as a `u32` length
//! followed by that many `f32` values. Parameters come first, then buffers,
//! both in the model's visitation order.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::network::{Backbone, BackboneConfig, STAGES};
use crate::reduction::{AnisoConfig, ReductionBackend, ReductionMode};
use crate::sa::{SaKind, SaVariant};
use crate::tensor::Layer;

pub const MAGIC: &[u8; 8] = b"ASSACKPT";
pub const VERSION: u32 = 1;

fn bad(msg: &str) -> Error {
    Error::Checkpoint(msg.into())
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| bad("value does not fit in u32"))?;
        self.0.extend_from_slice(&v.to_le_bytes());
        Ok(())
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a>(&'a [u8]);

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.0.len() < n {
            return Err(bad("truncated"));
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn bool(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(bad("invalid flag byte")),
        }
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

fn mode_code(m: ReductionMode) -> u8 {
    match m {
        ReductionMode::Max => 0,
        ReductionMode::Mean => 1,
        ReductionMode::Sum => 2,
    }
}

fn mode_from(c: u8) -> Result<ReductionMode> {
    Ok(match c {
        0 => ReductionMode::Max,
        1 => ReductionMode::Mean,
        2 => ReductionMode::Sum,
        _ => return Err(bad("unknown reduction mode")),
    })
}

fn write_config(w: &mut Writer, c: &BackboneConfig) -> Result<()> {
    let kind = SaKind::ALL.iter().position(|&k| k == c.variant.kind).expect("listed kind");
    w.u8(kind as u8);
    match c.variant.backend {
        ReductionBackend::Isotropic(m) => {
            w.u8(0);
            w.u8(mode_code(m));
        }
        ReductionBackend::Anisotropic(a) => {
            w.u8(1);
            w.u8(mode_code(a.base_reduction));
            w.u8(a.include_pads as u8);
        }
        ReductionBackend::PosPool(m) => {
            w.u8(2);
            w.u8(mode_code(m));
        }
        ReductionBackend::RelPosSum(m) => {
            w.u8(3);
            w.u8(mode_code(m));
        }
    }
    for v in [c.initial_width, c.depth, c.mlp_layers, c.num_classes, c.in_features, c.head_hidden] {
        w.u32(v)?;
    }
    for s in 0..STAGES {
        w.f64(c.stage_radii[s]);
        w.u32(c.stage_k[s])?;
    }
    w.f64(c.stage_subsample_ratio);
    w.u8(c.uniform_block_width as u8);
    w.u8(c.use_edge_concat as u8);
    w.u8(c.support_from_subsampled as u8);
    Ok(())
}

fn read_config(r: &mut Reader<'_>) -> Result<BackboneConfig> {
    let kind = *SaKind::ALL.get(r.u8()? as usize).ok_or_else(|| bad("unknown variant"))?;
    let backend = match r.u8()? {
        0 => ReductionBackend::Isotropic(mode_from(r.u8()?)?),
        1 => ReductionBackend::Anisotropic(AnisoConfig { base_reduction: mode_from(r.u8()?)?, include_pads: r.bool()? }),
        2 => ReductionBackend::PosPool(mode_from(r.u8()?)?),
        3 => ReductionBackend::RelPosSum(mode_from(r.u8()?)?),
        _ => return Err(bad("unknown reduction backend")),
    };
    let mut c = BackboneConfig::new(kind, 1, 1);
    c.variant = SaVariant { kind, backend };
    c.initial_width = r.u32()?;
    c.depth = r.u32()?;
    c.mlp_layers = r.u32()?;
    c.num_classes = r.u32()?;
    c.in_features = r.u32()?;
    c.head_hidden = r.u32()?;
    for s in 0..STAGES {
        c.stage_radii[s] = r.f64()?;
        c.stage_k[s] = r.u32()?;
    }
    c.stage_subsample_ratio = r.f64()?;
    c.uniform_block_width = r.bool()?;
    c.use_edge_concat = r.bool()?;
    c.support_from_subsampled = r.bool()?;
    Ok(c)
}

/// Serializes configuration, parameters and batch-norm running statistics.
pub fn encode(model: &mut Backbone<f32>) -> Result<Vec<u8>> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION as usize)?;
    write_config(&mut w, model.config())?;
    let mut tensors: Vec<Vec<f32>> = Vec::new();
    model.visit_params(&mut |p| tensors.push(p.value.as_slice().to_vec()));
    model.visit_buffers(&mut |b| tensors.push(b.clone()));
    w.u32(tensors.len())?;
    for t in &tensors {
        w.u32(t.len())?;
        for v in t {
            w.0.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(w.0)
}

/// Rebuilds a model from [`encode`] output.
pub fn decode(bytes: &[u8]) -> Result<Backbone<f32>> {
    let mut r = Reader(bytes);
    if r.take(MAGIC.len())? != MAGIC {
        return Err(bad("missing magic"));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(Error::Checkpoint(alloc::format!("unsupported version {version}")));
    }
    let cfg = read_config(&mut r)?;
    let mut model = Backbone::new(cfg, 0).map_err(|e| Error::Checkpoint(alloc::format!("{e}")))?;
    let count = r.u32()?;
    let mut tensors = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let n = r.u32()?;
        if r.0.len() / 4 < n {
            return Err(bad("truncated"));
        }
        tensors.push((0..n).map(|_| r.f32()).collect::<Result<Vec<f32>>>()?);
    }
    if !r.0.is_empty() {
        return Err(bad("trailing bytes"));
    }
    let mut it = tensors.into_iter();
    let mut err = None;
    let mut fill = |dst: &mut [f32]| match it.next() {
        Some(t) if t.len() == dst.len() => dst.copy_from_slice(&t),
        Some(_) => err = Some(bad("tensor size does not match the configuration")),
        None => err = Some(bad("too few tensors")),
    };
    model.visit_params(&mut |p| fill(p.value.as_mut_slice()));
    model.visit_buffers(&mut |b| fill(b));
    if it.next().is_some() {
        return Err(bad("too many tensors"));
    }
    match err {
        Some(e) => Err(e),
        None => Ok(model),
    }
}
