use alloc::vec::Vec;

use crate::error::{config_err, Result};
use crate::sa::{SaConfig, SaKind, SaVariant};

pub const STAGES: usize = 4;

/// Classification backbone: four set-abstraction stages of `depth` blocks each.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BackboneConfig {
    pub variant: SaVariant,
    /// Width `C` of the first stage; stage `s` has width `C * 2^s`.
    pub initial_width: usize,
    /// Aggregation blocks `D` per stage.
    pub depth: usize,
    /// MLP layers `L` per block.
    pub mlp_layers: usize,
    pub stage_radii: [f64; STAGES],
    pub stage_k: [usize; STAGES],
    pub stage_subsample_ratio: f64,
    pub num_classes: usize,
    /// Every block of a stage outputs the stage width and the stage output is
    /// their concatenation (`D * C * 2^s` channels).
    pub uniform_block_width: bool,
    /// Channels of the input point features.
    pub in_features: usize,
    pub head_hidden: usize,
    /// Vanilla only.
    pub use_edge_concat: bool,
    /// First block of each stage searches neighbors among the sampled points.
    pub support_from_subsampled: bool,
}

impl BackboneConfig {
    /// Defaults sized for point clouds in the unit cube: base radius 0.15
    /// doubling per stage, 16 neighbors, quarter subsampling, `D = 2`, `L = 3`.
    pub fn new(kind: SaKind, initial_width: usize, num_classes: usize) -> Self {
        let r = 0.15;
        Self {
            variant: SaVariant::of(kind),
            initial_width,
            depth: 2,
            mlp_layers: 3,
            stage_radii: [r, 2.0 * r, 4.0 * r, 8.0 * r],
            stage_k: [16; STAGES],
            stage_subsample_ratio: 0.25,
            num_classes,
            uniform_block_width: false,
            in_features: 3,
            head_hidden: 128,
            use_edge_concat: kind == SaKind::Vanilla,
            support_from_subsampled: false,
        }
    }

    /// The large configuration: `C = 128`, `D = 3`.
    pub fn large(kind: SaKind, num_classes: usize) -> Self {
        Self { depth: 3, ..Self::new(kind, 128, num_classes) }
    }

    pub fn stage_width(&self, s: usize) -> usize {
        self.initial_width << s
    }

    pub fn stage_output_width(&self, s: usize) -> usize {
        if self.uniform_block_width {
            self.depth * self.stage_width(s)
        } else {
            self.stage_width(s)
        }
    }

    pub fn feature_width(&self) -> usize {
        self.stage_output_width(STAGES - 1)
    }

    /// Block configurations of stage `s`, first block first.
    pub fn block_configs(&self, s: usize) -> Vec<SaConfig> {
        let in_ch = if s == 0 { self.in_features } else { self.stage_output_width(s - 1) };
        let width = self.stage_width(s);
        (0..self.depth)
            .map(|b| SaConfig {
                variant: self.variant,
                in_ch: if b == 0 { in_ch } else { width },
                out_ch: width,
                mlp_layers: self.mlp_layers,
                radius: self.stage_radii[s],
                k: self.stage_k[s],
                use_edge_concat: self.use_edge_concat && self.variant.kind == SaKind::Vanilla,
                support_from_subsampled: b == 0 && self.support_from_subsampled,
                pre_mlps: None,
            })
            .collect()
    }

    /// Points left after each stage for an input of `n` points.
    pub fn stage_points(&self, n: usize) -> [usize; STAGES] {
        let mut out = [0; STAGES];
        let mut cur = n;
        for o in out.iter_mut() {
            cur = (cur as f64 * self.stage_subsample_ratio) as usize;
            *o = cur;
        }
        out
    }

    /// Fewest input points that leave at least one point after the last stage.
    pub fn min_points(&self) -> usize {
        let mut n = 1;
        while self.stage_points(n)[STAGES - 1] == 0 {
            n += 1;
        }
        n
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.mlp_layers == 0 {
            return Err(config_err!("depth and MLP layers must be >= 1"));
        }
        if self.initial_width == 0 || self.num_classes == 0 || self.in_features == 0 || self.head_hidden == 0 {
            return Err(config_err!("widths and class count must be >= 1"));
        }
        if !(self.stage_subsample_ratio > 0.0 && self.stage_subsample_ratio <= 1.0) {
            return Err(config_err!("subsample ratio must be in (0, 1], got {}", self.stage_subsample_ratio));
        }
        for s in 0..STAGES {
            for c in self.block_configs(s) {
                c.validate()?;
            }
        }
        Ok(())
    }
}

/// Same configuration with initial width `c`.
pub fn scale_width(cfg: &BackboneConfig, c: usize) -> Result<BackboneConfig> {
    if c == 0 {
        return Err(config_err!("width must be >= 1"));
    }
    Ok(BackboneConfig { initial_width: c, ..*cfg })
}

/// Same configuration with `d` aggregation blocks per stage.
pub fn scale_depth(cfg: &BackboneConfig, d: usize) -> Result<BackboneConfig> {
    if d == 0 {
        return Err(config_err!("depth must be >= 1"));
    }
    Ok(BackboneConfig { depth: d, ..*cfg })
}
