use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{TrainConfig, Trainer};
use crate::data::Dataset;
use crate::propagation::propagate_forward;
use crate::{Error, Hyperparams, Matrix, Real, Result, SparseGraph};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchVariant {
    pub name: String,
    pub hp: Hyperparams,
}

impl BenchVariant {
    pub fn new(name: impl Into<String>, hp: Hyperparams) -> Self {
        Self { name: name.into(), hp }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub variant: String,
    pub layers: usize,
    /// Median over the timed epochs.
    pub sec_per_epoch: f64,
    pub store_bytes: usize,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Times training epochs for each variant with the same MLP and data.
///
/// Each variant runs `warmup` untimed epochs, then `max(epochs, 5)` timed
/// ones; validation is skipped so only training work is measured.
pub fn bench<T: Real>(
    data: &Dataset<T>,
    base: &TrainConfig,
    variants: &[BenchVariant],
    warmup: usize,
    epochs: usize,
) -> Result<Vec<BenchRow>> {
    let timed = epochs.max(5);
    let mut rows = Vec::with_capacity(variants.len());
    for v in variants {
        let cfg = TrainConfig { hp: v.hp, epochs: usize::MAX, eval_every: usize::MAX, ..base.clone() };
        let mut trainer = Trainer::new(data, &cfg)?;
        for _ in 0..warmup {
            trainer.run_epoch()?;
        }
        let mut times = Vec::with_capacity(timed);
        for _ in 0..timed {
            let t = Instant::now();
            trainer.run_epoch()?;
            times.push(t.elapsed().as_secs_f64());
        }
        rows.push(BenchRow {
            variant: v.name.clone(),
            layers: v.hp.layers,
            sec_per_epoch: median(times),
            store_bytes: trainer.state().store_bytes(),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionTiming {
    pub width: usize,
    /// Median seconds for one `layers`-step forward diffusion.
    pub seconds: f64,
}

/// Times plain forward diffusion on random inputs of each width.
pub fn bench_diffusion<T: Real>(
    graph: &SparseGraph<T>,
    widths: &[usize],
    alpha: f64,
    layers: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<DiffusionTiming>> {
    if reps == 0 {
        return Err(Error::invalid("reps must be at least 1"));
    }
    let n = graph.num_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(widths.len());
    for &w in widths {
        let data: Vec<f64> = (0..n * w).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x: Matrix<T> = Matrix::from_f64(n, w, &data)?;
        // one untimed run to warm caches
        propagate_forward(graph, &x, &x, alpha, layers)?;
        let mut times = Vec::with_capacity(reps);
        for _ in 0..reps {
            let t = Instant::now();
            std::hint::black_box(propagate_forward(graph, &x, &x, alpha, layers)?);
            times.push(t.elapsed().as_secs_f64());
        }
        out.push(DiffusionTiming { width: w, seconds: median(times) });
    }
    Ok(out)
}
