use assa_core::network::{Backbone, BackboneConfig};
use assa_core::profiler::{closed_form_ratio, count_backbone_flops, count_block, count_sa_flops};
use assa_core::sa::{SaBlock, SaConfig, SaKind};
use assa_core::tensor::MlpLayer;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn macs(layers: &[MlpLayer<f32>], rows: usize) -> u64 {
    layers.iter().map(|l| (l.in_ch() * l.out_ch() * rows) as u64).sum()
}

/// Multiply-adds of the dense layers read off a built block.
fn tally(block: &SaBlock<f32>, n_in: usize, m: usize, k: usize) -> u64 {
    let pre_rows = if block.config().kind() == SaKind::Vanilla { m * k } else { n_in };
    let short = block.shortcut.as_ref().map_or(0, |l| (l.in_ch() * l.out_ch() * m) as u64);
    macs(&block.pre, pre_rows) + macs(&block.post, m) + short
}

#[test]
fn closed_form_values() {
    let r = closed_form_ratio(64, 1024, 32, 3);
    let exact = (64.0 * 64.0 * 1024.0 * 32.0 * 3.0) / (64.0 * 64.0 * 1024.0 * 3.0 + 64.0 * 1024.0 * 32.0);
    assert_eq!(r, exact);
    assert!((r - 27.428_571).abs() < 1e-5);
    // a single neighbor leaves nothing to save
    for (c, l) in [(8, 1), (64, 3)] {
        let cl = (c * l) as f64;
        assert!((closed_form_ratio(c, 500, 1, l) - cl / (cl + 1.0)).abs() < 1e-12);
    }
}

#[test]
fn single_block_counts_follow_the_formula_terms() {
    let (c, n, k, l) = (64, 1024, 32, 3);
    let vanilla = SaConfig { mlp_layers: l, k, use_edge_concat: false, ..SaConfig::new(SaKind::Vanilla, c, c) };
    let (v, _) = count_block(&vanilla, n, n, k).unwrap();
    assert_eq!(v.pre_mlp + v.post_mlp, (c * c * n * k * l) as u64);

    let sep = SaConfig { mlp_layers: l, k, ..SaConfig::new(SaKind::Separable, c, c) };
    let (s, _) = count_block(&sep, n, n, k).unwrap();
    assert_eq!(s.pre_mlp + s.post_mlp, (c * c * n * l) as u64);
    assert_eq!(s.reduction, (c * n * k) as u64);
    let report = count_sa_flops(&sep, n, k).unwrap();
    assert_eq!(report.measured_ratio, (c * c * n * k * l + c * n * k) as f64 / (c * c * n * l + c * n * k) as f64);
    assert_eq!(report.ratio_vs_vanilla, closed_form_ratio(c, n, k, l));
}

#[test]
fn counts_match_a_tally_of_built_blocks() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for kind in SaKind::ALL {
        for (i, o) in [(3, 16), (16, 16), (6, 18), (32, 64)] {
            let cfg = SaConfig { k: 12, ..SaConfig::new(kind, i, o) };
            let block = SaBlock::<f32>::new(cfg, &mut rng).unwrap();
            let (f, _) = count_block(&cfg, 700, 175, 12).unwrap();
            assert_eq!(f.pre_mlp + f.post_mlp + f.shortcut, tally(&block, 700, 175, 12), "{kind:?} {i}->{o}");
        }
    }
}

#[test]
fn backbone_counts_match_a_tally_of_the_built_model() {
    for kind in SaKind::ALL {
        for uniform in [false, true] {
            let cfg = BackboneConfig { uniform_block_width: uniform, ..BackboneConfig::new(kind, 16, 4) };
            let model = Backbone::<f32>::new(cfg, 0).unwrap();
            let n = 1024;
            let pts = cfg.stage_points(n);
            let mut expected = 0;
            let mut n_in = n;
            for (i, block) in model.blocks().enumerate() {
                let s = i / cfg.depth;
                let support = if i % cfg.depth == 0 { n_in } else { pts[s] };
                expected += tally(block, support, pts[s], cfg.stage_k[s]);
                if i % cfg.depth == cfg.depth - 1 {
                    n_in = pts[s];
                }
            }
            let report = count_backbone_flops(&cfg, n).unwrap();
            let t = report.totals;
            assert_eq!(t.pre_mlp + t.post_mlp + t.shortcut, expected, "{kind:?}");
            assert_eq!(report.stages.len(), 4);
        }
    }
}

#[test]
fn doubling_width_quadruples_mlp_work() {
    for kind in [SaKind::Vanilla, SaKind::Separable, SaKind::Assa] {
        let at = |c: usize| {
            let cfg = SaConfig { use_edge_concat: false, ..SaConfig::new(kind, c, c) };
            let f = count_sa_flops(&cfg, 2048, 16).unwrap().totals;
            f.pre_mlp + f.post_mlp + f.shortcut
        };
        assert_eq!(at(96), 4 * at(48), "{kind:?}");
    }
}

#[test]
fn backbone_flops_strictly_increase_with_width_and_depth() {
    for kind in SaKind::ALL {
        let total = |c: usize, d: usize| {
            let cfg = BackboneConfig { depth: d, ..BackboneConfig::new(kind, c, 4) };
            count_backbone_flops(&cfg, 1024).unwrap().total()
        };
        for d in 1..=3 {
            let by_width: Vec<u64> = [8, 16, 32, 64, 128].iter().map(|&c| total(c, d)).collect();
            assert!(by_width.windows(2).all(|w| w[0] < w[1]), "{kind:?} {by_width:?}");
        }
        for c in [8, 32] {
            let by_depth: Vec<u64> = (1..=4).map(|d| total(c, d)).collect();
            assert!(by_depth.windows(2).all(|w| w[0] < w[1]), "{kind:?} {by_depth:?}");
        }
    }
}

#[test]
fn assa_backbone_is_cheaper_than_vanilla() {
    let cfg = BackboneConfig::new(SaKind::Assa, 64, 4);
    let r = count_backbone_flops(&cfg, 1024).unwrap();
    assert!(r.measured_ratio > 4.0, "{}", r.measured_ratio);
    assert_eq!(r.ratio_vs_vanilla, r.measured_ratio);
}
