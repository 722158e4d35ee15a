use crate::error::{config_err, Result};
use crate::reduction::{AnisoConfig, ReductionBackend, ReductionMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SaKind {
    /// MLPs on every neighbor copy, then pool.
    Vanilla,
    /// MLPs on points, then group and pool.
    PreConv,
    /// MLPs split around the pooling, plus a residual.
    Separable,
    /// Separable with a `ceil(C/3)` bottleneck and anisotropic pooling.
    Assa,
}

impl SaKind {
    pub const ALL: [SaKind; 4] = [SaKind::Vanilla, SaKind::PreConv, SaKind::Separable, SaKind::Assa];

    pub fn name(self) -> &'static str {
        match self {
            SaKind::Vanilla => "vanilla",
            SaKind::PreConv => "preconv",
            SaKind::Separable => "separable",
            SaKind::Assa => "assa",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn is_separable_family(self) -> bool {
        matches!(self, SaKind::Separable | SaKind::Assa)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SaVariant {
    pub kind: SaKind,
    pub backend: ReductionBackend,
}

impl SaVariant {
    /// The kind with its default pooling: max, anisotropic for ASSA.
    pub fn of(kind: SaKind) -> Self {
        let backend = match kind {
            SaKind::Assa => ReductionBackend::Anisotropic(AnisoConfig::default()),
            _ => ReductionBackend::Isotropic(ReductionMode::Max),
        };
        Self { kind, backend }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match (self.kind, self.backend) {
            (SaKind::Assa, ReductionBackend::Anisotropic(_)) => true,
            (SaKind::Assa, _) => false,
            (SaKind::Separable, _) => true,
            (_, ReductionBackend::Isotropic(_)) => true,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(config_err!("{:?} pooling is not valid for the {} variant", self.backend, self.kind.name()))
        }
    }
}

/// One aggregation block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaConfig {
    pub variant: SaVariant,
    pub in_ch: usize,
    pub out_ch: usize,
    /// Total MLP layers `L` in the block.
    pub mlp_layers: usize,
    pub radius: f64,
    pub k: usize,
    /// Vanilla only: prepend the normalized `(p_j - p_i)` to every neighbor vector.
    pub use_edge_concat: bool,
    /// Search neighbors among the queries instead of the full input set.
    pub support_from_subsampled: bool,
    /// Overrides the MLP split of separable-family blocks (default `ceil(L/2)` before pooling).
    pub pre_mlps: Option<usize>,
}

impl SaConfig {
    pub fn new(kind: SaKind, in_ch: usize, out_ch: usize) -> Self {
        Self {
            variant: SaVariant::of(kind),
            in_ch,
            out_ch,
            mlp_layers: 3,
            radius: 0.15,
            k: 16,
            use_edge_concat: kind == SaKind::Vanilla,
            support_from_subsampled: false,
            pre_mlps: None,
        }
    }

    pub fn kind(&self) -> SaKind {
        self.variant.kind
    }

    /// MLP layers applied before pooling.
    pub fn pre_count(&self) -> usize {
        match self.kind() {
            SaKind::Vanilla | SaKind::PreConv => self.mlp_layers,
            _ => self.pre_mlps.unwrap_or(self.mlp_layers.div_ceil(2)),
        }
    }

    pub fn post_count(&self) -> usize {
        self.mlp_layers - self.pre_count()
    }

    /// `ceil(out_ch / 3)`, the ASSA pre-pooling width.
    pub fn bottleneck(&self) -> usize {
        self.out_ch.div_ceil(3)
    }

    /// Width of the features that get grouped (`f^res` for separable-family blocks).
    pub fn grouped_width(&self) -> usize {
        match self.kind() {
            SaKind::Vanilla => self.in_ch + if self.use_edge_concat { 3 } else { 0 },
            SaKind::Assa => self.bottleneck(),
            _ => self.out_ch,
        }
    }

    /// Width coming out of the pooling.
    pub fn reduced_width(&self) -> Result<usize> {
        let pooled = match self.kind() {
            SaKind::Vanilla => self.out_ch,
            _ => self.grouped_width(),
        };
        self.variant.backend.output_width(pooled)
    }

    /// The pre-grouping residual `ReLU(MLP(f) + f)` is only shape-valid when the
    /// input already has the bottleneck width.
    pub fn inner_residual(&self) -> bool {
        self.kind() == SaKind::Assa && self.in_ch == self.bottleneck()
    }

    /// Input/output widths of every MLP before pooling.
    pub fn pre_widths(&self) -> alloc::vec::Vec<(usize, usize)> {
        let n = self.pre_count();
        let first_in = match self.kind() {
            SaKind::Vanilla => self.grouped_width(),
            _ => self.in_ch,
        };
        let last_out = match self.kind() {
            SaKind::Assa => self.bottleneck(),
            _ => self.out_ch,
        };
        (0..n)
            .map(|i| {
                let i_in = if i == 0 { first_in } else { self.out_ch };
                let i_out = if i + 1 == n { last_out } else { self.out_ch };
                (i_in, i_out)
            })
            .collect()
    }

    pub fn post_widths(&self) -> Result<alloc::vec::Vec<(usize, usize)>> {
        let first_in = self.reduced_width()?;
        Ok((0..self.post_count())
            .map(|i| (if i == 0 { first_in } else { self.out_ch }, self.out_ch))
            .collect())
    }

    /// Linear shortcut `(in, out)` when `f^res` and the output widths differ.
    pub fn shortcut_widths(&self) -> Option<(usize, usize)> {
        (self.kind().is_separable_family() && self.grouped_width() != self.out_ch)
            .then(|| (self.grouped_width(), self.out_ch))
    }

    pub fn validate(&self) -> Result<()> {
        self.variant.validate()?;
        if self.mlp_layers == 0 {
            return Err(config_err!("a block needs at least one MLP layer"));
        }
        if self.k == 0 {
            return Err(config_err!("neighbor cap k must be >= 1"));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(config_err!("radius must be positive, got {}", self.radius));
        }
        if self.in_ch == 0 || self.out_ch == 0 {
            return Err(config_err!("channel widths must be >= 1"));
        }
        if self.use_edge_concat && self.kind() != SaKind::Vanilla {
            return Err(config_err!("edge concatenation only applies to the vanilla variant"));
        }
        if self.kind().is_separable_family() {
            let pre = self.pre_count();
            if pre == 0 || pre > self.mlp_layers {
                return Err(config_err!("{pre} pre-pooling MLPs out of {} layers", self.mlp_layers));
            }
            if self.post_count() == 0 && self.reduced_width()? != self.out_ch {
                return Err(config_err!(
                    "no MLP after pooling but pooled width {} != output width {}",
                    self.reduced_width()?,
                    self.out_ch
                ));
            }
        }
        self.reduced_width().map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_for_three_layers() {
        let c = SaConfig::new(SaKind::Separable, 8, 16);
        assert_eq!((c.pre_count(), c.post_count()), (2, 1));
        let a = SaConfig { mlp_layers: 2, ..SaConfig::new(SaKind::Assa, 8, 16) };
        assert_eq!((a.pre_count(), a.post_count()), (1, 1));
    }

    #[test]
    fn assa_widths() {
        let c = SaConfig::new(SaKind::Assa, 12, 24);
        assert_eq!(c.bottleneck(), 8);
        assert_eq!(c.pre_widths(), alloc::vec![(12, 24), (24, 8)]);
        assert_eq!(c.reduced_width().unwrap(), 24);
        assert_eq!(c.post_widths().unwrap(), alloc::vec![(24, 24)]);
        assert_eq!(c.shortcut_widths(), Some((8, 24)));
        let c = SaConfig::new(SaKind::Assa, 3, 4);
        assert_eq!(c.bottleneck(), 2);
        assert_eq!(c.reduced_width().unwrap(), 6);
    }

    #[test]
    fn invalid_backends() {
        let mut c = SaConfig::new(SaKind::Assa, 4, 4);
        c.variant.backend = ReductionBackend::Isotropic(ReductionMode::Max);
        assert!(c.validate().is_err());
        let mut c = SaConfig::new(SaKind::PreConv, 4, 4);
        c.variant.backend = ReductionBackend::PosPool(ReductionMode::Max);
        assert!(c.validate().is_err());
        let mut c = SaConfig::new(SaKind::Separable, 4, 6);
        c.variant.backend = ReductionBackend::PosPool(ReductionMode::Max);
        assert!(c.validate().is_ok());
        let c = SaConfig { mlp_layers: 1, ..SaConfig::new(SaKind::Assa, 4, 16) };
        assert!(c.validate().is_err());
        let c = SaConfig { use_edge_concat: true, ..SaConfig::new(SaKind::PreConv, 4, 4) };
        assert!(c.validate().is_err());
    }
}
