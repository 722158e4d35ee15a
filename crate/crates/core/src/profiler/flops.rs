use alloc::vec::Vec;
use core::ops::{Add, AddAssign};

use crate::error::Result;
use crate::network::{BackboneConfig, STAGES};
use crate::sa::{SaConfig, SaKind, SaVariant};

/// Multiply-add counts of one block or stage. One multiply-add is one unit.
///
/// `grouping_gather` counts copied elements rather than arithmetic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BucketFlops {
    pub pre_mlp: u64,
    pub grouping_gather: u64,
    pub reduction: u64,
    pub post_mlp: u64,
    pub shortcut: u64,
}

impl BucketFlops {
    pub fn total(&self) -> u64 {
        self.pre_mlp + self.grouping_gather + self.reduction + self.post_mlp + self.shortcut
    }

    /// MLP and pooling work only, the quantity the vanilla/ASSA ratio compares.
    pub fn mlp_and_reduction(&self) -> u64 {
        self.pre_mlp + self.reduction + self.post_mlp
    }
}

impl Add for BucketFlops {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        self += o;
        self
    }
}

impl AddAssign for BucketFlops {
    fn add_assign(&mut self, o: Self) {
        self.pre_mlp += o.pre_mlp;
        self.grouping_gather += o.grouping_gather;
        self.reduction += o.reduction;
        self.post_mlp += o.post_mlp;
        self.shortcut += o.shortcut;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlopsReport {
    /// One entry per block (single block) or per stage (backbone).
    pub stages: Vec<BucketFlops>,
    pub totals: BucketFlops,
    /// Batch-norm and ReLU element operations, kept out of `totals`.
    pub norm_activation: u64,
    /// For a single block, the closed-form `C·C·N·K·L / (C·C·N·L + C·N·K)`
    /// with `C = out_ch`. For a backbone, `measured_ratio`.
    pub ratio_vs_vanilla: f64,
    /// Counted MLP+reduction work of the same shapes built as vanilla, over this one's.
    pub measured_ratio: f64,
}

impl FlopsReport {
    pub fn total(&self) -> u64 {
        self.totals.total()
    }
}

/// `C·C·N·K·L / (C·C·N·L + C·N·K)`, evaluated in f64.
pub fn closed_form_ratio(c: usize, n: usize, k: usize, l: usize) -> f64 {
    let (c, n, k, l) = (c as f64, n as f64, k as f64, l as f64);
    (c * c * n * k * l) / (c * c * n * l + c * n * k)
}

fn mlp_units(widths: &[(usize, usize)], rows: u64) -> (u64, u64) {
    let macs = widths.iter().map(|&(a, b)| (a * b) as u64).sum::<u64>() * rows;
    // one BN affine plus one ReLU per output element
    let elementwise = widths.iter().map(|&(_, b)| 2 * b as u64).sum::<u64>() * rows;
    (macs, elementwise)
}

/// Counts for one block with `n_in` input points, `m` queries and `k` neighbors.
pub fn count_block(cfg: &SaConfig, n_in: usize, m: usize, k: usize) -> Result<(BucketFlops, u64)> {
    cfg.validate()?;
    let (n_in, m, k) = (n_in as u64, m as u64, k as u64);
    let mk = m * k;
    let pre_rows = match cfg.kind() {
        SaKind::Vanilla => mk,
        _ => n_in,
    };
    let (pre_mlp, pre_elem) = mlp_units(&cfg.pre_widths(), pre_rows);
    let (post_mlp, post_elem) = mlp_units(&cfg.post_widths()?, m);
    let grouped = match cfg.kind() {
        SaKind::Vanilla => cfg.in_ch,
        _ => cfg.grouped_width(),
    } as u64;
    // neighbor features plus their three offsets
    let grouping_gather = mk * (grouped + 3);
    let pooled = match cfg.kind() {
        SaKind::Vanilla => cfg.out_ch,
        _ => cfg.grouped_width(),
    };
    let reduction = mk * cfg.variant.backend.output_width(pooled)? as u64;
    let shortcut = cfg.shortcut_widths().map_or(0, |(a, b)| (a * b) as u64 * m);
    let mut extra = pre_elem + post_elem;
    if cfg.kind().is_separable_family() {
        extra += m * cfg.out_ch as u64; // final ReLU
    }
    Ok((BucketFlops { pre_mlp, grouping_gather, reduction, post_mlp, shortcut }, extra))
}

fn as_vanilla(cfg: &SaConfig) -> SaConfig {
    SaConfig {
        variant: SaVariant::of(SaKind::Vanilla),
        use_edge_concat: false,
        pre_mlps: None,
        ..*cfg
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// A single block where every point is a query: `N = n_points`, `K = k`.
pub fn count_sa_flops(cfg: &SaConfig, n_points: usize, k: usize) -> Result<FlopsReport> {
    let (b, extra) = count_block(cfg, n_points, n_points, k)?;
    let (v, _) = count_block(&as_vanilla(cfg), n_points, n_points, k)?;
    Ok(FlopsReport {
        stages: alloc::vec![b],
        totals: b,
        norm_activation: extra,
        ratio_vs_vanilla: closed_form_ratio(cfg.out_ch, n_points, k, cfg.mlp_layers),
        measured_ratio: ratio(v.mlp_and_reduction(), b.mlp_and_reduction()),
    })
}

fn backbone_counts(cfg: &BackboneConfig, n_points: usize) -> Result<(Vec<BucketFlops>, u64)> {
    cfg.validate()?;
    let pts = cfg.stage_points(n_points);
    let mut stages = Vec::with_capacity(STAGES);
    let mut extra = 0;
    let mut n_in = n_points;
    for (s, &m) in pts.iter().enumerate() {
        let mut acc = BucketFlops::default();
        for (b, bc) in cfg.block_configs(s).iter().enumerate() {
            let support = if b == 0 && !bc.support_from_subsampled { n_in } else { m };
            let (f, e) = count_block(bc, support, m, cfg.stage_k[s])?;
            acc += f;
            extra += e;
        }
        stages.push(acc);
        n_in = m;
    }
    Ok((stages, extra))
}

/// The encoder stages for an input of `n_points` points; the classifier head is excluded.
pub fn count_backbone_flops(cfg: &BackboneConfig, n_points: usize) -> Result<FlopsReport> {
    let (stages, extra) = backbone_counts(cfg, n_points)?;
    let totals = stages.iter().copied().fold(BucketFlops::default(), Add::add);
    let vanilla = BackboneConfig {
        variant: SaVariant::of(SaKind::Vanilla),
        use_edge_concat: false,
        ..*cfg
    };
    let (vstages, _) = backbone_counts(&vanilla, n_points)?;
    let vtotal: u64 = vstages.iter().map(BucketFlops::mlp_and_reduction).sum();
    let measured = ratio(vtotal, totals.mlp_and_reduction());
    Ok(FlopsReport { stages, totals, norm_activation: extra, ratio_vs_vanilla: measured, measured_ratio: measured })
}
