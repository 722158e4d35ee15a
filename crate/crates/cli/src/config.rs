//! Flat TOML run configuration.
//!
//! Every key is optional and overrides the built-in default:
//!
//! ```toml
//! variant = "assa"            # vanilla | preconv | separable | assa
//! reduction = "max"           # max | mean | sum
//! initial_width = 16
//! depth = 1
//! mlp_layers = 3
//! stage_radii = [0.15, 0.3, 0.6, 1.2]
//! stage_k = [16, 16, 16, 16]
//! stage_subsample_ratio = 0.25
//! num_classes = 4
//! uniform_block_width = false
//! in_features = 3
//! head_hidden = 128
//! use_edge_concat = false
//! support_from_subsampled = false
//! epochs = 50
//! batch_size = 16
//! lr = 0.02
//! momentum = 0.9
//! weight_decay = 0.001
//! cosine = true
//! seed = 0
//! ```

use std::path::Path;

use anyhow::{anyhow, Context, Result};
use assa_core::network::{BackboneConfig, TrainConfig};
use assa_core::reduction::{AnisoConfig, ReductionBackend, ReductionMode};
use assa_core::sa::{SaKind, SaVariant};
use serde::Deserialize;

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub variant: Option<String>,
    pub reduction: Option<String>,
    pub initial_width: Option<usize>,
    pub depth: Option<usize>,
    pub mlp_layers: Option<usize>,
    pub stage_radii: Option<[f64; 4]>,
    pub stage_k: Option<[usize; 4]>,
    pub stage_subsample_ratio: Option<f64>,
    pub num_classes: Option<usize>,
    pub uniform_block_width: Option<bool>,
    pub in_features: Option<usize>,
    pub head_hidden: Option<usize>,
    pub use_edge_concat: Option<bool>,
    pub support_from_subsampled: Option<bool>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub momentum: Option<f64>,
    pub weight_decay: Option<f64>,
    pub cosine: Option<bool>,
    pub seed: Option<u64>,
}

pub fn parse_kind(s: &str) -> Result<SaKind> {
    SaKind::parse(s).ok_or_else(|| anyhow!("unknown variant {s:?} (expected vanilla, preconv, separable or assa)"))
}

pub fn parse_mode(s: &str) -> Result<ReductionMode> {
    match s {
        "max" => Ok(ReductionMode::Max),
        "mean" => Ok(ReductionMode::Mean),
        "sum" => Ok(ReductionMode::Sum),
        _ => Err(anyhow!("unknown reduction {s:?} (expected max, mean or sum)")),
    }
}

/// Variant with its default backend, using `mode` as the base reduction.
pub fn variant_with_mode(kind: SaKind, mode: ReductionMode) -> SaVariant {
    let backend = match kind {
        SaKind::Assa => ReductionBackend::Anisotropic(AnisoConfig { base_reduction: mode, include_pads: true }),
        _ => ReductionBackend::Isotropic(mode),
    };
    SaVariant { kind, backend }
}

/// The toy-run defaults: tiny backbone (`C = 16`, `D = 1`) on four classes.
pub fn default_backbone(kind: SaKind) -> BackboneConfig {
    BackboneConfig { depth: 1, ..BackboneConfig::new(kind, 16, 4) }
}

pub fn default_train() -> TrainConfig {
    TrainConfig { lr: 0.02, momentum: 0.9, ..TrainConfig::default() }
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn backbone(&self) -> Result<BackboneConfig> {
        let kind = match &self.variant {
            Some(v) => parse_kind(v)?,
            None => SaKind::Assa,
        };
        let mut c = default_backbone(kind);
        if let Some(r) = &self.reduction {
            c.variant = variant_with_mode(kind, parse_mode(r)?);
        }
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        set!(
            initial_width,
            depth,
            mlp_layers,
            stage_radii,
            stage_k,
            stage_subsample_ratio,
            num_classes,
            uniform_block_width,
            in_features,
            head_hidden,
            use_edge_concat,
            support_from_subsampled
        );
        c.validate()?;
        Ok(c)
    }

    pub fn train(&self) -> TrainConfig {
        let mut t = default_train();
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { t.$f = v; } )* };
        }
        set!(epochs, batch_size, lr, momentum, weight_decay, cosine, seed);
        t
    }
}
