mod common;

use common::*;
use dermgraph::graph::{build_external_graph, build_internal_graph, count_cooccurrence, proximity_matrix};

#[test]
fn graph_weights_match_counted_fractions() {
    let mut r = rng(11);
    for _ in 0..20 {
        let n = 1 + (rand::Rng::random_range(&mut r, 0..200));
        let cases = random_labels(&mut r, n);
        let q = count_cooccurrence(cases.iter().copied()).unwrap();
        let internal = build_internal_graph(&q);
        let Ok(external) = build_external_graph(&q) else {
            assert_eq!(q.totals[MEL], 0);
            continue;
        };
        let expect = brute_force_fractions(&cases);
        for p in 0..8 {
            for s in 0..8 {
                let got = internal.adjacency[[p, s]] + external.adjacency[[p, s]];
                let want = expect[p][s].map_or(0.0, |(a, b)| a as f64 / b as f64);
                assert_eq!(got, want, "edge {p}->{s}");
            }
        }
    }
}

#[test]
fn asymmetric_pair() {
    let q = count_cooccurrence(asymmetry_cases()).unwrap();
    let g = build_internal_graph(&q);
    assert!((g.adjacency[[0, 2]] - 0.42).abs() < 1e-12);
    assert!((g.adjacency[[2, 0]] - 0.31).abs() < 1e-12);
}

#[test]
fn proximity_matches_path_enumeration() {
    let mut r = rng(5);
    for _ in 0..40 {
        let a = random_adjacency(&mut r);
        for k in [2, 3] {
            let p = proximity_matrix(&a, k);
            let o = oracle_proximity(&a, k);
            for i in 0..8 {
                for j in 0..8 {
                    assert!((p[[i, j]] - o[i][j]).abs() < 1e-12, "k={k} ({i},{j})");
                }
            }
        }
    }
}

#[test]
fn auc_matches_pairwise_with_ties() {
    let mut r = rng(3);
    for _ in 0..20 {
        let scores: Vec<f64> = (0..200).map(|_| f64::from(rand::Rng::random_range(&mut r, 0..25u8)) / 4.0).collect();
        let labels: Vec<u8> = (0..200).map(|_| u8::from(rand::Rng::random_bool(&mut r, 0.4))).collect();
        let fast = dermgraph::eval::auc(&scores, &labels).unwrap();
        assert!((fast - pairwise_auc(&scores, &labels)).abs() < 1e-9);
    }
}
