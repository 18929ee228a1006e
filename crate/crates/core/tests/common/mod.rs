#![allow(dead_code)]

use lazygnn::data::{Dataset, Split};
use lazygnn::{build_graph, Matrix, SparseGraph};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Erdos-Renyi graph with edge probability `p`, normalized with self-loops.
pub fn random_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> SparseGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    build_graph(&edges, n).unwrap().normalize(true)
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Small random classification problem on a random graph.
pub fn random_dataset(n: usize, d: usize, classes: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let graph = random_graph(n, 0.2, &mut r);
    let features = random_matrix(n, d, &mut r);
    let labels = (0..n).map(|_| r.random_range(0..classes)).collect();
    let split = Split::random(n, 0.6, 0.2, seed).unwrap();
    Dataset::new(graph, features, labels, classes, split).unwrap()
}

/// The 2-node graph with one edge, normalized with self-loops: every entry 1/2.
pub fn two_node() -> SparseGraph {
    build_graph(&[(0, 1)], 2).unwrap().normalize(true)
}
