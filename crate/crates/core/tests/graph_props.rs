mod common;

use std::collections::{BTreeSet, VecDeque};

use lazygnn::{build_graph, sample_lhop, Matrix, SparseGraph};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn edges_strategy(max_n: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1..=max_n).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..(3 * n))))
}

fn dense(g: &SparseGraph) -> DMatrix<f64> {
    let n = g.num_nodes();
    let d = g.to_dense();
    DMatrix::from_row_slice(n, n, d.data())
}

fn bfs(g: &SparseGraph, targets: &[usize], hops: usize) -> BTreeSet<usize> {
    let mut depth = vec![usize::MAX; g.num_nodes()];
    let mut queue = VecDeque::new();
    for &t in targets {
        depth[t] = 0;
        queue.push_back(t);
    }
    while let Some(u) = queue.pop_front() {
        if depth[u] == hops {
            continue;
        }
        for &v in g.neighbors(u) {
            if depth[v] == usize::MAX {
                depth[v] = depth[u] + 1;
                queue.push_back(v);
            }
        }
    }
    (0..g.num_nodes()).filter(|&v| depth[v] != usize::MAX).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csr_invariants_hold((n, edges) in edges_strategy(40)) {
        let g: SparseGraph = build_graph(&edges, n).unwrap();
        let rp = g.row_ptr();
        prop_assert_eq!(rp[0], 0);
        prop_assert_eq!(rp[n], g.col_idx().len());
        prop_assert_eq!(g.col_idx().len(), g.values().len());
        for i in 0..n {
            prop_assert!(rp[i] <= rp[i + 1]);
            let cols = g.neighbors(i);
            prop_assert!(cols.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(cols.iter().all(|&c| c < n));
        }
        prop_assert!(g.is_symmetric());
        for &(s, d) in &edges {
            prop_assert!(g.value(s, d).is_some() && g.value(d, s).is_some());
        }
    }

    #[test]
    fn normalization_adds_only_self_loops((n, edges) in edges_strategy(40), loops in any::<bool>()) {
        let raw: SparseGraph = build_graph(&edges, n).unwrap();
        let a = raw.normalize(loops);
        prop_assert!(a.is_symmetric());
        for i in 0..n {
            for &j in a.neighbors(i) {
                prop_assert!(raw.value(i, j).is_some() || (loops && i == j));
            }
            if loops {
                prop_assert!(a.value(i, i).is_some());
            }
        }
        let again = a.normalize(false);
        prop_assert_eq!(again.col_idx(), a.col_idx());
    }

    #[test]
    fn spectral_radius_at_most_one((n, edges) in edges_strategy(120), loops in any::<bool>()) {
        let a: SparseGraph = build_graph(&edges, n).unwrap().normalize(loops);
        let eig = SymmetricEigen::new(dense(&a));
        let rho = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(rho <= 1.0 + 1e-12, "spectral radius {}", rho);
    }

    #[test]
    fn spmm_is_self_adjoint((n, edges) in edges_strategy(60), seed in any::<u64>()) {
        let a: SparseGraph = build_graph(&edges, n).unwrap().normalize(true);
        let mut r = common::rng(seed);
        let x = common::random_matrix(n, 3, &mut r);
        let y = common::random_matrix(n, 3, &mut r);
        let lhs = x.dot(&a.spmm(&y).unwrap()).unwrap();
        let rhs = a.spmm(&x).unwrap().dot(&y).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn spmm_matches_dense_product_bitwise((n, edges) in edges_strategy(60), seed in any::<u64>()) {
        let a: SparseGraph = build_graph(&edges, n).unwrap().normalize(true);
        let x = common::random_matrix(n, 4, &mut common::rng(seed));
        let dense = a.to_dense();
        let mut reference = Matrix::zeros(n, 4);
        for i in 0..n {
            for c in 0..4 {
                let mut acc = 0.0;
                for j in 0..n {
                    let w = dense.get(i, j);
                    if w != 0.0 {
                        acc += w * x.get(j, c);
                    }
                }
                reference.set(i, c, acc);
            }
        }
        prop_assert_eq!(a.spmm(&x).unwrap(), reference);
    }

    #[test]
    fn closure_matches_brute_force_bfs(
        (n, edges) in edges_strategy(100),
        picks in prop::collection::vec(any::<prop::sample::Index>(), 1..6),
        hops in 1usize..4,
    ) {
        let g: SparseGraph = build_graph(&edges, n).unwrap().normalize(true);
        let targets: Vec<usize> = picks.iter().map(|p| p.index(n)).collect();
        let batch = sample_lhop(&g, &targets, hops).unwrap();
        let got: BTreeSet<usize> = batch.closure.iter().copied().collect();
        prop_assert_eq!(got.len(), batch.closure.len(), "closure has duplicates");
        prop_assert_eq!(got, bfs(&g, &targets, hops));
        let mut seen = BTreeSet::new();
        let dedup: Vec<usize> = targets.iter().copied().filter(|t| seen.insert(*t)).collect();
        prop_assert_eq!(&batch.closure[..batch.num_targets()], &dedup[..]);
        // induced slice of the global weights, nothing dropped
        let local = &batch.local_graph;
        for (li, &gi) in batch.closure.iter().enumerate() {
            for (lj, &gj) in batch.closure.iter().enumerate() {
                prop_assert_eq!(local.value(li, lj), g.value(gi, gj));
            }
        }
    }
}

#[test]
fn all_node_targets_reproduce_the_graph() {
    let g = common::random_graph(30, 0.2, &mut common::rng(3));
    let all: Vec<usize> = (0..30).collect();
    let batch = sample_lhop(&g, &all, 2).unwrap();
    assert_eq!(batch.closure, all);
    assert_eq!(batch.local_graph, g);
}
