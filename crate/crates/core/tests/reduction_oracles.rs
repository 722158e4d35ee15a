mod common;

use assa_core::geometry::GroupedTensor;
use assa_core::reduction::{
    anisotropic_reduce, pospool_reduce, reduce, relpos_sum_reduce, AnisoConfig, ReductionBackend, ReductionMode,
    Reducer,
};
use assa_core::tensor::{Matrix, Mode};
use common::*;

const MODES: [ReductionMode; 3] = [ReductionMode::Max, ReductionMode::Mean, ReductionMode::Sum];

fn pool(vals: &[f64], mode: ReductionMode) -> f64 {
    match mode {
        ReductionMode::Max => vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ReductionMode::Sum => vals.iter().sum(),
        ReductionMode::Mean => vals.iter().sum::<f64>() / vals.len() as f64,
    }
}

/// `out[i][c] = pool_j weight(rel_ij, c) * f_ij[src(c)]` over the included slots.
fn scalar_oracle(
    g: &GroupedTensor<f64>,
    mode: ReductionMode,
    include_pads: bool,
    out_ch: usize,
    weight: impl Fn(&[f64; 3], usize) -> f64,
    src: impl Fn(usize) -> usize,
) -> Matrix<f64> {
    let (m, k) = (g.queries(), g.k);
    Matrix::from_fn(m, out_ch, |i, c| {
        let vals: Vec<f64> = (0..k)
            .filter(|&j| include_pads || !g.pad[i * k + j])
            .map(|j| weight(&g.rel_positions[i * k + j], c) * g.features.get(i * k + j, src(c)))
            .collect();
        pool(&vals, mode)
    })
}

fn one_slot(features: &[f64], rel: [f64; 3]) -> GroupedTensor<f64> {
    GroupedTensor {
        k: 1,
        features: Matrix::new(1, features.len(), features.to_vec()).unwrap(),
        rel_positions: vec![rel],
        pad: vec![false],
        radius: 1.0,
    }
}

#[test]
fn isotropic_hand_example() {
    let g = GroupedTensor {
        k: 2,
        features: Matrix::new(2, 2, vec![1.0, 2.0, 3.0, 0.0]).unwrap(),
        rel_positions: vec![[0.0; 3]; 2],
        pad: vec![false; 2],
        radius: 1.0,
    };
    assert_eq!(reduce(&g, ReductionMode::Max).unwrap().as_slice(), &[3.0, 2.0]);
    assert_eq!(reduce(&g, ReductionMode::Sum).unwrap().as_slice(), &[4.0, 2.0]);
    assert_eq!(reduce(&g, ReductionMode::Mean).unwrap().as_slice(), &[2.0, 1.0]);
    let single = one_slot(&[4.0, -1.0], [0.3, 0.1, 0.0]);
    for mode in MODES {
        assert_eq!(reduce(&single, mode).unwrap().as_slice(), &[4.0, -1.0]);
    }
}

#[test]
fn isotropic_matches_scalar_loop() {
    let mut rng = rng(13);
    let g = random_grouped(&mut rng, 8, 16, 4);
    for mode in MODES {
        let want = scalar_oracle(&g, mode, true, 4, |_, _| 1.0, |c| c);
        assert!(max_abs(&reduce(&g, mode).unwrap(), &want) < 1e-6);
    }
}

#[test]
fn anisotropic_hand_examples() {
    let cfg = AnisoConfig { base_reduction: ReductionMode::Sum, include_pads: true };
    let g = one_slot(&[5.0, -2.0], [1.0, 0.0, 0.0]);
    assert_eq!(anisotropic_reduce(&g, cfg).unwrap().as_slice(), &[5.0, -2.0, 0.0, 0.0, 0.0, 0.0]);
    let mut rng = rng(3);
    let mut coincident = random_grouped(&mut rng, 3, 4, 5);
    coincident.rel_positions.iter_mut().for_each(|r| *r = [0.0; 3]);
    for base in MODES {
        let out = anisotropic_reduce(&coincident, AnisoConfig { base_reduction: base, include_pads: true }).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn anisotropic_matches_triple_loop() {
    let mut rng = rng(17);
    let (m, k, c) = (4, 8, 3);
    let g = random_grouped(&mut rng, m, k, c);
    let got = anisotropic_reduce(&g, AnisoConfig { base_reduction: ReductionMode::Sum, include_pads: true }).unwrap();
    let mut want = Matrix::zeros(m, 3 * c);
    for i in 0..m {
        for j in 0..k {
            for ch in 0..c {
                for a in 0..3 {
                    let v = want.get(i, a * c + ch) + g.rel_positions[i * k + j][a] * g.features.get(i * k + j, ch);
                    want.set(i, a * c + ch, v);
                }
            }
        }
    }
    assert!(max_abs(&got, &want) < 1e-6);
    for include_pads in [true, false] {
        for base in MODES {
            let cfg = AnisoConfig { base_reduction: base, include_pads };
            let want = scalar_oracle(&g, base, include_pads, 3 * c, |r, o| r[o / c], |o| o % c);
            assert!(max_abs(&anisotropic_reduce(&g, cfg).unwrap(), &want) < 1e-6);
        }
    }
}

#[test]
fn pospool_examples_and_oracle() {
    let (a, b, c) = (0.3, -0.7, 0.25);
    let g = one_slot(&[1.0, 1.0, 1.0], [a, b, c]);
    assert_eq!(pospool_reduce(&g, ReductionMode::Sum).unwrap().as_slice(), &[a, b, c]);
    let mut rng = rng(19);
    let mut zero = random_grouped(&mut rng, 2, 3, 4);
    zero.rel_positions.iter_mut().for_each(|r| *r = [0.0; 3]);
    assert!(pospool_reduce(&zero, ReductionMode::Max).unwrap().as_slice().iter().all(|&v| v == 0.0));
    assert!(pospool_reduce(&random_grouped(&mut rng, 2, 3, 2), ReductionMode::Sum).is_err());

    // C = 7 splits as 3 + 2 + 2
    let g = random_grouped(&mut rng, 6, 10, 7);
    let group_of = |ch: usize| match ch {
        0..=2 => 0,
        3..=4 => 1,
        _ => 2,
    };
    for mode in MODES {
        let want = scalar_oracle(&g, mode, true, 7, |r, ch| r[group_of(ch)], |ch| ch);
        assert!(max_abs(&pospool_reduce(&g, mode).unwrap(), &want) < 1e-6);
    }
}

#[test]
fn relpos_sum_examples_and_oracle() {
    let g = one_slot(&[2.0, -3.0], [1.0, -1.0, 0.0]);
    assert_eq!(relpos_sum_reduce(&g, ReductionMode::Sum).unwrap().as_slice(), &[0.0, 0.0]);
    let mut rng = rng(23);
    let g = random_grouped(&mut rng, 5, 6, 3);
    for mode in MODES {
        let want = scalar_oracle(&g, mode, true, 3, |r, _| r[0] + r[1] + r[2], |ch| ch);
        assert!(max_abs(&relpos_sum_reduce(&g, mode).unwrap(), &want) < 1e-6);
    }
}

#[test]
fn max_gradient_goes_to_the_first_winning_slot() {
    let g = GroupedTensor {
        k: 3,
        features: Matrix::new(3, 1, vec![1.0, 4.0, 4.0]).unwrap(),
        rel_positions: vec![[0.0; 3]; 3],
        pad: vec![false; 3],
        radius: 1.0,
    };
    let mut r = Reducer::new(ReductionBackend::Isotropic(ReductionMode::Max));
    r.forward(&g, Mode::Train).unwrap();
    let d = r.backward(&Matrix::new(1, 1, vec![1.0]).unwrap()).unwrap();
    assert_eq!(d.as_slice(), &[0.0, 1.0, 0.0]);
}

fn permute(g: &GroupedTensor<f64>, perm_of_row: &[Vec<usize>]) -> GroupedTensor<f64> {
    let k = g.k;
    let mut out = g.clone();
    for (i, perm) in perm_of_row.iter().enumerate() {
        for (dst, &src) in perm.iter().enumerate() {
            out.features.row_mut(i * k + dst).copy_from_slice(g.features.row(i * k + src));
            out.rel_positions[i * k + dst] = g.rel_positions[i * k + src];
            out.pad[i * k + dst] = g.pad[i * k + src];
        }
    }
    out
}

#[test]
fn every_backend_is_invariant_to_slot_order() {
    let mut rng = rng(29);
    let backends = |mode| {
        [
            ReductionBackend::Isotropic(mode),
            ReductionBackend::Anisotropic(AnisoConfig { base_reduction: mode, include_pads: true }),
            ReductionBackend::Anisotropic(AnisoConfig { base_reduction: mode, include_pads: false }),
            ReductionBackend::PosPool(mode),
            ReductionBackend::RelPosSum(mode),
        ]
    };
    for _ in 0..50 {
        let g = random_grouped(&mut rng, 5, 9, 6);
        let perms: Vec<Vec<usize>> = (0..5).map(|_| shuffled(&mut rng, 9)).collect();
        let p = permute(&g, &perms);
        for mode in MODES {
            for b in backends(mode) {
                let x = Reducer::new(b).forward(&g, Mode::Eval).unwrap();
                let y = Reducer::new(b).forward(&p, Mode::Eval).unwrap();
                if mode == ReductionMode::Max {
                    assert_eq!(x, y, "{b:?}");
                } else {
                    assert!(max_abs(&x, &y) <= 1e-6, "{b:?}");
                }
            }
        }
    }
}

#[test]
fn geometry_separates_what_isotropic_pooling_cannot() {
    // same neighbor features, mirrored layout
    let features = Matrix::new(2, 2, vec![1.0, 0.5, -0.25, 2.0]).unwrap();
    let a = GroupedTensor {
        k: 2,
        features: features.clone(),
        rel_positions: vec![[0.8, 0.0, 0.0], [0.0, 0.6, 0.0]],
        pad: vec![false; 2],
        radius: 1.0,
    };
    let b = GroupedTensor { rel_positions: vec![[0.0, 0.0, -0.8], [-0.6, 0.0, 0.0]], ..a.clone() };
    for mode in MODES {
        assert_eq!(reduce(&a, mode).unwrap(), reduce(&b, mode).unwrap());
        let cfg = AnisoConfig { base_reduction: mode, include_pads: true };
        assert!(max_abs(&anisotropic_reduce(&a, cfg).unwrap(), &anisotropic_reduce(&b, cfg).unwrap()) > 1e-3);
    }
}
