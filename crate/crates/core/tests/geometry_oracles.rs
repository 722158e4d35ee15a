mod common;

use assa_core::geometry::{ball_query, farthest_point_sample, group, NeighborTable, Point};
use assa_core::tensor::Matrix;
use common::*;
use proptest::prelude::*;
use rand::Rng;

fn d2(a: &Point<f32>, b: &Point<f32>) -> f32 {
    let (x, y, z) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    x * x + y * y + z * z
}

/// Greedy farthest point selection, recomputing every distance from scratch.
fn brute_fps(p: &[Point<f32>], m: usize) -> Vec<u32> {
    let mut picked = vec![0usize];
    while picked.len() < m {
        let mut best = (f32::NEG_INFINITY, usize::MAX);
        for i in 0..p.len() {
            if picked.contains(&i) {
                continue;
            }
            let d = picked.iter().map(|&j| d2(&p[i], &p[j])).fold(f32::INFINITY, f32::min);
            if d > best.0 {
                best = (d, i);
            }
        }
        picked.push(best.1);
    }
    picked.into_iter().map(|i| i as u32).collect()
}

/// All support points within `r`, ascending, capped at `k`; nearest point if none.
fn brute_ball(q: &Point<f32>, s: &[Point<f32>], r: f32, k: usize) -> Vec<u32> {
    let inside: Vec<u32> = (0..s.len()).filter(|&j| d2(&s[j], q) <= r * r).map(|j| j as u32).take(k).collect();
    if !inside.is_empty() {
        return inside;
    }
    let mut best = 0;
    for j in 1..s.len() {
        if d2(&s[j], q) < d2(&s[best], q) {
            best = j;
        }
    }
    vec![best as u32]
}

#[test]
fn fps_matches_brute_force_greedy() {
    let mut rng = rng(8);
    for _ in 0..200 {
        let n = rng.random_range(1..=64);
        let m = rng.random_range(1..=n);
        let mut pts = cube_points_f32(&mut rng, n);
        if rng.random_bool(0.2) && n > 2 {
            pts[1] = pts[0]; // duplicates must still be sampled once each
        }
        assert_eq!(farthest_point_sample(&pts, m, 0).unwrap(), brute_fps(&pts, m));
    }
}

#[test]
fn fps_first_two_picks_on_a_line() {
    let pts: Vec<Point<f32>> = (0..5).map(|i| [i as f32, 0.0, 0.0]).collect();
    assert_eq!(farthest_point_sample(&pts, 3, 0).unwrap(), vec![0, 4, 2]);
}

#[test]
fn ball_query_matches_all_pairs_filter() {
    let mut rng = rng(9);
    for _ in 0..200 {
        let n = rng.random_range(1..=64);
        let m = rng.random_range(1..=16);
        let k = rng.random_range(1..=16);
        let r: f32 = rng.random_range(0.05..0.6);
        let support = cube_points_f32(&mut rng, n);
        let query = cube_points_f32(&mut rng, m);
        let t = ball_query(&query, &support, r, k).unwrap();
        assert_eq!((t.rows(), t.k()), (m, k));
        let mut fallbacks = 0;
        for (i, q) in query.iter().enumerate() {
            let want = brute_ball(q, &support, r, k);
            let got: Vec<u32> = t.neighbors(i).collect();
            assert_eq!(got, want, "query {i}");
            if d2(&support[want[0] as usize], q) > r * r {
                fallbacks += 1;
            } else {
                for &j in &got {
                    assert!(d2(&support[j as usize], q).sqrt() <= r + 1e-5);
                }
            }
            for (&j, &p) in t.row(i).iter().zip(t.row_pads(i)) {
                if p {
                    assert_eq!(j, want[0], "pads repeat the first neighbor");
                }
            }
        }
        assert_eq!(t.fallback_rows, fallbacks);
    }
}

#[test]
fn ball_query_contract_examples() {
    let pts: Vec<Point<f32>> = vec![[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [2.0, 0.0, 0.0]];
    let t = ball_query(&pts[..1], &pts, 1.0, 4).unwrap();
    assert_eq!(t.row(0), &[0, 1, 0, 0]);
    assert_eq!(t.row_pads(0), &[false, false, true, true]);
    assert!(ball_query(&pts, &pts, 0.0, 4).is_err());
    assert!(ball_query(&pts, &pts, 1.0, 0).is_err());
    assert!(ball_query(&pts, &[], 1.0, 2).is_err());
}

#[test]
fn grouping_normalizes_offsets_by_radius() {
    let support: Vec<Point<f32>> = vec![[0.0, 0.0, 0.0], [0.2, -0.1, 0.0]];
    let feats = Matrix::from_fn(2, 2, |r, c| (r * 10 + c) as f32);
    let t = NeighborTable::new(2, vec![0, 1], vec![false, false]).unwrap();
    let g = group(&support[..1], &support, &feats, &t, 0.2).unwrap();
    assert_eq!(g.features.row(1), &[10.0, 11.0]);
    let rel = g.rel_positions[1];
    assert!((rel[0] - 1.0).abs() < 1e-6 && (rel[1] + 0.5).abs() < 1e-6 && rel[2] == 0.0);
}

proptest! {
    #[test]
    fn fps_returns_distinct_indices(seed in any::<u64>(), n in 1usize..48) {
        let mut rng = rng(seed);
        let pts = cube_points_f32(&mut rng, n);
        let m = rng.random_range(1..=n);
        let mut s = farthest_point_sample(&pts, m, 0).unwrap();
        prop_assert_eq!(s[0], 0);
        s.sort_unstable();
        s.dedup();
        prop_assert_eq!(s.len(), m);
    }

    #[test]
    fn ball_rows_are_ascending_and_padded_at_the_end(seed in any::<u64>(), k in 1usize..12) {
        let mut rng = rng(seed);
        let support = cube_points_f32(&mut rng, 40);
        let query = cube_points_f32(&mut rng, 8);
        let t = ball_query(&query, &support, 0.3, k).unwrap();
        for i in 0..t.rows() {
            let real: Vec<u32> = t.neighbors(i).collect();
            prop_assert!(real.windows(2).all(|w| w[0] < w[1]));
            let pads = t.row_pads(i);
            prop_assert!(pads[..real.len()].iter().all(|p| !p));
            prop_assert!(pads[real.len()..].iter().all(|&p| p));
        }
    }
}
