//! Stochastic block model generator.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Dataset, Split};
use crate::{build_graph, Error, Matrix, Real, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SbmSpec {
    pub blocks: usize,
    pub nodes_per_block: usize,
    /// Edge probability inside a block.
    pub p_in: f64,
    /// Edge probability across blocks.
    pub p_out: f64,
    pub feature_dim: usize,
    pub feature_noise_sigma: f64,
    pub seed: u64,
    pub train_frac: f64,
    pub val_frac: f64,
}

impl Default for SbmSpec {
    fn default() -> Self {
        Self {
            blocks: 4,
            nodes_per_block: 250,
            p_in: 0.05,
            p_out: 0.005,
            feature_dim: 16,
            feature_noise_sigma: 1.0,
            seed: 0,
            train_frac: 0.6,
            val_frac: 0.2,
        }
    }
}

impl SbmSpec {
    pub fn num_nodes(&self) -> usize {
        self.blocks * self.nodes_per_block
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks == 0 || self.nodes_per_block == 0 {
            return Err(Error::invalid("SBM needs at least one block of at least one node"));
        }
        if !(0.0 <= self.p_out && self.p_out < self.p_in && self.p_in <= 1.0) {
            return Err(Error::invalid(format!(
                "SBM needs 0 <= p_out < p_in <= 1, got p_in = {}, p_out = {}",
                self.p_in, self.p_out
            )));
        }
        if self.feature_dim == 0 {
            return Err(Error::invalid("feature_dim must be positive"));
        }
        if !(self.feature_noise_sigma >= 0.0 && self.feature_noise_sigma.is_finite()) {
            return Err(Error::invalid("feature_noise_sigma must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Node `v` belongs to block `v / nodes_per_block`, which is also its label.
/// Its feature row is the one-hot vector at `block % feature_dim` plus
/// Gaussian noise, rounded to `f32` so that saved datasets reload bit-exactly.
pub fn generate_sbm<T: Real>(spec: &SbmSpec) -> Result<Dataset<T>> {
    spec.validate()?;
    let n = spec.num_nodes();
    let m = spec.nodes_per_block;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut edges = Vec::new();
    for a in 0..spec.blocks {
        for b in a..spec.blocks {
            if a == b {
                let total = m * (m - 1) / 2;
                sample_pairs(&mut rng, total, spec.p_in, |k| {
                    let (i, j) = triangle_pair(k);
                    edges.push((a * m + i, a * m + j));
                });
            } else {
                sample_pairs(&mut rng, m * m, spec.p_out, |k| {
                    edges.push((a * m + k / m, b * m + k % m));
                });
            }
        }
    }
    let graph = build_graph::<T>(&edges, n)?.normalize(true);

    let labels: Vec<usize> = (0..n).map(|v| v / m).collect();
    let d = spec.feature_dim;
    let mut x = vec![0.0f64; n * d];
    for v in 0..n {
        let row = &mut x[v * d..(v + 1) * d];
        row[labels[v] % d] = 1.0;
        for e in row.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *e = (*e + spec.feature_noise_sigma * z) as f32 as f64;
        }
    }
    let features = Matrix::from_f64(n, d, &x)?;
    let split = Split::random(n, spec.train_frac, spec.val_frac, spec.seed ^ 0x5eed_5b11)?;
    Dataset::new(graph, features, labels, spec.blocks, split)
}

/// Calls `emit(k)` for each index of `0..total` kept with probability `p`,
/// jumping between kept indices with geometric skips.
fn sample_pairs(rng: &mut ChaCha8Rng, total: usize, p: f64, mut emit: impl FnMut(usize)) {
    if p <= 0.0 || total == 0 {
        return;
    }
    if p >= 1.0 {
        (0..total).for_each(emit);
        return;
    }
    let log_q = (1.0 - p).ln();
    let mut k: usize = 0;
    loop {
        let r: f64 = rng.random();
        let skip = ((1.0 - r).ln() / log_q).floor();
        if !skip.is_finite() || skip >= (total - k) as f64 {
            return;
        }
        k += skip as usize;
        emit(k);
        k += 1;
        if k >= total {
            return;
        }
    }
}

/// The `k`-th pair `(i, j)`, `i < j`, in the order (0,1), (0,2), (1,2), (0,3), ...
fn triangle_pair(k: usize) -> (usize, usize) {
    let mut j = ((1.0 + (1.0 + 8.0 * k as f64).sqrt()) / 2.0).floor() as usize;
    while j * (j - 1) / 2 > k {
        j -= 1;
    }
    while (j + 1) * j / 2 <= k {
        j += 1;
    }
    (k - j * (j - 1) / 2, j)
}
