//! Full-batch and mini-batch training with history stores.
//!
//! One iteration is one optimizer step: the MLP maps features to logits,
//! the logits are diffused from the feature history, the loss gradient is
//! diffused back from the gradient history, and both stores are refreshed on
//! the batch targets.

mod bench;
mod eval;
mod metrics;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use bench::{bench, bench_diffusion, BenchRow, BenchVariant, DiffusionTiming};
pub use eval::{accuracy, evaluate, evaluate_converged, predict_lazy};
pub use metrics::{write_metrics_header, write_metrics_row, MetricsWriter, METRICS_HEADER};

use crate::data::Dataset;
use crate::nn::{
    adam_step, mlp_backward, mlp_forward_with_ids, softmax_cross_entropy, AdamState, MlpGrads, MlpParams, Mode,
};
use crate::propagation::{lazy_backward_masked, lazy_forward_masked};
use crate::{sample_lhop, Error, Hyperparams, LazyState, Matrix, Real, Result, SparseGraph, Store};

/// Which nodes mini-batches are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BatchTargets {
    /// Training nodes only.
    #[default]
    Train,
    /// Every node; unlabeled targets refresh the stores but add no loss.
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Targets per batch; 0 trains full-batch.
    pub batch_size: usize,
    pub batch_targets: BatchTargets,
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub seed: u64,
    /// Hidden widths of the MLP; the output width is the class count.
    pub hidden: Vec<usize>,
    pub hp: Hyperparams,
    /// Propagation layers at evaluation time; `None` uses `hp.layers`.
    pub inference_layers: Option<usize>,
    /// Epochs between validation evaluations.
    pub eval_every: usize,
    /// Nodes tracked by the redundancy probe in mini-batch mode.
    pub probe_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 0,
            batch_targets: BatchTargets::Train,
            lr: 0.01,
            weight_decay: 0.0,
            dropout: 0.5,
            seed: 0,
            hidden: vec![64],
            hp: Hyperparams::default(),
            inference_layers: None,
            eval_every: 1,
            probe_size: 1024,
        }
    }
}

impl TrainConfig {
    /// `lr = 0` is accepted: it freezes the model, which is how the stores'
    /// own dynamics are studied.
    pub fn validate(&self) -> Result<()> {
        self.hp.validate()?;
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("lr must be finite and non-negative, got {}", self.lr)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid("weight_decay must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        if self.eval_every == 0 {
            return Err(Error::invalid("eval_every must be at least 1"));
        }
        if self.inference_layers == Some(0) {
            return Err(Error::invalid("inference_layers must be at least 1"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::invalid("hidden widths must be positive"));
        }
        Ok(())
    }

    pub fn inference_hp(&self) -> Hyperparams {
        Hyperparams { layers: self.inference_layers.unwrap_or(self.hp.layers), ..self.hp }
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Optimizer steps taken so far.
    pub iteration: u64,
    /// Mean loss over the epoch's iterations that had labeled targets.
    pub train_loss: f64,
    /// Set on evaluation epochs.
    pub val_accuracy: Option<f64>,
    /// Relative change of the probed feature-store rows since the previous
    /// epoch; `None` until every probed row has been written twice.
    pub redundancy: Option<f64>,
    pub wall_ms: f64,
    pub store_bytes: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T = f64> {
    pub records: Vec<EpochRecord>,
    /// Loss of every iteration, `None` where the batch had no labeled target.
    pub iteration_losses: Vec<Option<f64>>,
    pub params: MlpParams<T>,
    pub state: LazyState<T>,
}

/// `||cur - prev||_F / ||prev||_F`.
pub fn redundancy_probe<T: Real>(prev: &Matrix<T>, cur: &Matrix<T>) -> Result<f64> {
    prev.ensure_same_shape(cur, "redundancy_probe")?;
    let denom = prev.frobenius_norm();
    if denom == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(cur.sub(prev)?.frobenius_norm() / denom)
}

/// Per-iteration dropout seed.
fn iteration_seed(seed: u64, iteration: u64) -> u64 {
    seed ^ (iteration.wrapping_add(1)).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Stepwise trainer owning the model, optimizer and history stores.
#[derive(Debug, Clone)]
pub struct Trainer<'a, T: Real = f64> {
    data: &'a Dataset<T>,
    cfg: TrainConfig,
    params: MlpParams<T>,
    adam: AdamState<T>,
    state: LazyState<T>,
    is_train: Vec<bool>,
    iteration: u64,
    epoch: usize,
    pool: Vec<usize>,
    probe: Vec<usize>,
    last_probe: Option<Matrix<T>>,
    losses: Vec<Option<f64>>,
}

impl<'a, T: Real> Trainer<'a, T> {
    pub fn new(data: &'a Dataset<T>, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if data.split.train.is_empty() {
            return Err(Error::Empty("training set"));
        }
        let n = data.num_nodes();
        let pool = if cfg.batch_size == 0 {
            (0..n).collect()
        } else {
            match cfg.batch_targets {
                BatchTargets::Train => data.split.train.clone(),
                BatchTargets::All => (0..n).collect(),
            }
        };
        if cfg.batch_size > pool.len() {
            return Err(Error::invalid(format!(
                "batch_size {} exceeds the {} candidate targets",
                cfg.batch_size,
                pool.len()
            )));
        }
        let mut dims = vec![data.feature_dim()];
        dims.extend(&cfg.hidden);
        dims.push(data.num_classes);
        let params = MlpParams::glorot(&dims, cfg.dropout, cfg.seed)?;
        let adam = AdamState::new(&params, cfg.lr, cfg.weight_decay);
        let mut is_train = vec![false; n];
        for &v in &data.split.train {
            is_train[v] = true;
        }
        let probe = if cfg.batch_size == 0 || pool.len() <= cfg.probe_size {
            pool.clone()
        } else {
            let mut p = pool.clone();
            p.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x70_726f_6265));
            p.truncate(cfg.probe_size);
            p.sort_unstable();
            p
        };
        Ok(Self {
            data,
            cfg: cfg.clone(),
            params,
            adam,
            state: LazyState::new(n, data.num_classes),
            is_train,
            iteration: 0,
            epoch: 0,
            pool,
            probe,
            last_probe: None,
            losses: Vec::new(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn params(&self) -> &MlpParams<T> {
        &self.params
    }

    /// Replaces the model, e.g. with one loaded from disk. The optimizer
    /// state is reset.
    pub fn set_params(&mut self, params: MlpParams<T>) -> Result<()> {
        if params.dims() != self.params.dims() {
            return Err(Error::shape(format!(
                "model dims {:?} do not match the trainer's {:?}",
                params.dims(),
                self.params.dims()
            )));
        }
        self.adam = AdamState::new(&params, self.cfg.lr, self.cfg.weight_decay);
        self.params = params;
        Ok(())
    }

    pub fn state(&self) -> &LazyState<T> {
        &self.state
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn iteration_losses(&self) -> &[Option<f64>] {
        &self.losses
    }

    /// Nodes tracked by the redundancy probe.
    pub fn probe_nodes(&self) -> &[usize] {
        &self.probe
    }

    /// Dropout seed used by iteration `iteration` (0-based).
    pub fn dropout_seed(&self, iteration: u64) -> u64 {
        iteration_seed(self.cfg.seed, iteration)
    }

    /// One optimizer step on a batch.
    ///
    /// `closure` lists global ids with the `num_targets` targets first and
    /// `graph` is the normalized adjacency restricted to `closure` (the full
    /// graph when `closure` is every node in order). Returns the loss, or
    /// `None` when no target is a training node, in which case the stores are
    /// still refreshed but the model is left alone.
    pub fn step(&mut self, graph: &SparseGraph<T>, closure: &[usize], num_targets: usize) -> Result<Option<f64>> {
        match self.step_gradient(graph, closure, num_targets)? {
            Some((loss, grads)) => {
                adam_step(&mut self.adam, &mut self.params, &grads)?;
                Ok(Some(loss))
            }
            None => Ok(None),
        }
    }

    /// [`Trainer::step`] without the optimizer update: runs both lazy passes,
    /// refreshes the stores and returns the loss with the parameter gradient.
    pub fn step_gradient(
        &mut self,
        graph: &SparseGraph<T>,
        closure: &[usize],
        num_targets: usize,
    ) -> Result<Option<(f64, MlpGrads<T>)>> {
        if graph.num_nodes() != closure.len() || num_targets == 0 || num_targets > closure.len() {
            return Err(Error::shape(format!(
                "batch of {} targets over {} closure nodes on a {}-node graph",
                num_targets,
                closure.len(),
                graph.num_nodes()
            )));
        }
        let full = closure.len() == self.data.num_nodes() && closure.iter().enumerate().all(|(i, &v)| i == v);
        let x = if full { self.data.features.clone() } else { self.data.features.gather_rows(closure)? };
        let targets = &closure[..num_targets];
        self.state.tick();
        let mode = Mode::Train { seed: self.dropout_seed(self.iteration) };
        let (x_in, cache) = mlp_forward_with_ids(&self.params, &x, mode, closure)?;

        let hist = self.state.gather(Store::Features, closure)?;
        let x_out = lazy_forward_masked(graph, &hist.rows, Some(&hist.initialized), &x_in, &self.cfg.hp)?;
        self.state.scatter(Store::Features, targets, &head_rows(&x_out, num_targets))?;

        let labeled: Vec<usize> = (0..num_targets).filter(|&r| self.is_train[closure[r]]).collect();
        self.iteration += 1;
        if labeled.is_empty() {
            self.losses.push(None);
            return Ok(None);
        }
        let labels: Vec<usize> = closure.iter().map(|&v| self.data.labels[v]).collect();
        let (loss, grad_top) = softmax_cross_entropy(&x_out, &labels, &labeled)?;

        let ghist = self.state.gather(Store::Gradients, closure)?;
        let mut g0 = lazy_backward_masked(graph, &ghist.rows, Some(&ghist.initialized), &grad_top, &self.cfg.hp)?;
        self.state.scatter(Store::Gradients, targets, &head_rows(&g0, num_targets))?;
        // Only target rows feed the chain rule.
        for r in num_targets..g0.rows() {
            g0.row_mut(r).fill(T::zero());
        }
        let grads = mlp_backward(&self.params, cache.as_ref(), &g0)?;
        self.losses.push(Some(loss));
        Ok(Some((loss, grads)))
    }

    /// Runs one epoch: a single full-graph step, or one step per batch of a
    /// seeded shuffle of the target pool.
    pub fn run_epoch(&mut self) -> Result<EpochRecord> {
        let start = Instant::now();
        let mut total = 0.0;
        let mut counted = 0usize;
        if self.cfg.batch_size == 0 {
            let all: Vec<usize> = (0..self.data.num_nodes()).collect();
            let graph = &self.data.graph;
            if let Some(l) = self.step(graph, &all, all.len())? {
                total += l;
                counted += 1;
            }
        } else {
            let mut order = self.pool.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
            rng.set_stream(self.epoch as u64 + 1);
            order.shuffle(&mut rng);
            for chunk in order.chunks(self.cfg.batch_size) {
                let batch = sample_lhop(&self.data.graph, chunk, self.cfg.hp.layers)?;
                if let Some(l) = self.step(&batch.local_graph, &batch.closure, batch.num_targets())? {
                    total += l;
                    counted += 1;
                }
            }
        }
        self.epoch += 1;
        let redundancy = self.probe_redundancy()?;
        let val_accuracy = if self.epoch.is_multiple_of(self.cfg.eval_every) || self.epoch == self.cfg.epochs {
            if self.data.split.val.is_empty() {
                None
            } else {
                Some(evaluate(&self.params, &self.state, self.data, &self.data.split.val, &self.cfg)?)
            }
        } else {
            None
        };
        Ok(EpochRecord {
            epoch: self.epoch,
            iteration: self.iteration,
            train_loss: if counted == 0 { f64::NAN } else { total / counted as f64 },
            val_accuracy,
            redundancy,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            store_bytes: self.state.store_bytes(),
        })
    }

    fn probe_redundancy(&mut self) -> Result<Option<f64>> {
        let flags = self.state.initialized(Store::Features);
        if !self.probe.iter().all(|&v| flags[v]) {
            return Ok(None);
        }
        let cur = self.state.matrix(Store::Features).gather_rows(&self.probe)?;
        let out = match &self.last_probe {
            Some(prev) if prev.frobenius_norm() > 0.0 => Some(redundancy_probe(prev, &cur)?),
            _ => None,
        };
        self.last_probe = Some(cur);
        Ok(out)
    }

    /// Runs the configured number of epochs, handing each record to `on_record`.
    pub fn run(mut self, mut on_record: impl FnMut(&EpochRecord) -> Result<()>) -> Result<TrainOutcome<T>> {
        let mut records = Vec::with_capacity(self.cfg.epochs);
        for _ in 0..self.cfg.epochs {
            let rec = self.run_epoch()?;
            on_record(&rec)?;
            records.push(rec);
        }
        Ok(self.finish(records))
    }

    pub fn finish(self, records: Vec<EpochRecord>) -> TrainOutcome<T> {
        TrainOutcome { records, iteration_losses: self.losses, params: self.params, state: self.state }
    }
}

fn head_rows<T: Real>(m: &Matrix<T>, n: usize) -> Matrix<T> {
    Matrix::from_vec_unchecked(n, m.cols(), m.data()[..n * m.cols()].to_vec())
}

/// Full-batch training; `cfg.batch_size` is ignored.
pub fn train_full_batch<T: Real>(data: &Dataset<T>, cfg: &TrainConfig) -> Result<TrainOutcome<T>> {
    let cfg = TrainConfig { batch_size: 0, ..cfg.clone() };
    Trainer::new(data, &cfg)?.run(|_| Ok(()))
}

/// Mini-batch training over L-hop subgraphs.
pub fn train_mini_batch<T: Real>(data: &Dataset<T>, cfg: &TrainConfig) -> Result<TrainOutcome<T>> {
    if cfg.batch_size == 0 {
        return Err(Error::invalid("mini-batch training needs batch_size >= 1"));
    }
    Trainer::new(data, cfg)?.run(|_| Ok(()))
}
