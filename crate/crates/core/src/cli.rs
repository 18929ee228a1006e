//! The `lazygnn` command line.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Precision, RunConfig, TrainMode};
use crate::data::{generate_sbm, load_dataset_dir, write_dataset, Dataset, SbmSpec};
use crate::nn::MlpFile;
use crate::propagation::{
    fixed_point_iteration_cap, fixed_point_solve, implicit_grad_reference, propagate_backward, propagate_forward,
};
use crate::trainer::{bench, bench_diffusion, evaluate, evaluate_converged, BenchVariant, MetricsWriter, Trainer};
use crate::{build_graph, Error, Hyperparams, LazyState, Matrix, Real, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "lazygnn", version, about = "Shallow GNN training with lazy propagation")]
struct Cli {
    /// Run configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for model init, dropout, shuffles and generators.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Extra `key=value` config overrides, applied last.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model and write metrics, config, model and state.
    Train(TrainArgs),
    /// Evaluate a saved model.
    Eval(EvalArgs),
    /// Time training epochs across propagation depths.
    Bench(BenchArgs),
    /// Check the diffusion solvers against dense references.
    OracleCheck(OracleArgs),
    /// Generate a stochastic block model dataset.
    GenSbm(SbmArgs),
    /// Train and print the per-epoch feature-change series.
    Redundancy(TrainArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    Mini,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MaskArg {
    Train,
    Val,
    Test,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Dataset directory.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    layers: Option<usize>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    /// Model JSON written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// State checkpoint; without it evaluation starts from empty stores.
    #[arg(long)]
    state: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    mask: MaskArg,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Dataset directory; a generated SBM is used when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Timed epochs per variant (at least 5).
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 2)]
    warmup: usize,
    /// Plain-APPNP baseline depth.
    #[arg(long, default_value_t = 10)]
    appnp_layers: usize,
    #[command(flatten)]
    sbm: SbmShape,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Feature columns per trial.
    #[arg(long, default_value_t = 3)]
    width: usize,
}

#[derive(Debug, Args)]
struct SbmArgs {
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    shape: SbmShape,
}

#[derive(Debug, Args)]
struct SbmShape {
    #[arg(long, default_value_t = 4)]
    blocks: usize,
    #[arg(long, default_value_t = 250)]
    nodes_per_block: usize,
    #[arg(long, default_value_t = 0.05)]
    p_in: f64,
    #[arg(long, default_value_t = 0.005)]
    p_out: f64,
    #[arg(long, default_value_t = 16)]
    feature_dim: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
}

impl SbmShape {
    fn spec(&self, seed: u64) -> SbmSpec {
        SbmSpec {
            blocks: self.blocks,
            nodes_per_block: self.nodes_per_block,
            p_in: self.p_in,
            p_out: self.p_out,
            feature_dim: self.feature_dim,
            feature_noise_sigma: self.sigma,
            seed,
            ..SbmSpec::default()
        }
    }
}

/// Runs the CLI with `argv` (including the program name).
pub fn run_cli<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run_cli`] writing to the given streams.
pub fn run_cli_with<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::Config(_) => EXIT_USAGE,
                _ => EXIT_RUNTIME,
            }
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.train.seed = s;
    }
    Ok(cfg)
}

fn apply_overrides(cfg: &mut RunConfig, overrides: &[String]) -> Result<()> {
    for kv in overrides {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("override {kv:?} is not KEY=VALUE")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(())
}

fn apply_train_args(cfg: &mut RunConfig, a: &TrainArgs) {
    let t = &mut cfg.train;
    if let Some(v) = &a.data {
        cfg.data = Some(v.clone());
    }
    if let Some(v) = &a.out {
        cfg.out = Some(v.clone());
    }
    if let Some(m) = a.mode {
        cfg.mode = match m {
            ModeArg::Full => TrainMode::Full,
            ModeArg::Mini => TrainMode::Mini,
        };
    }
    macro_rules! take {
        ($($field:ident => $dst:expr),*) => {$(if let Some(v) = a.$field { $dst = v; })*};
    }
    take!(epochs => t.epochs, batch_size => t.batch_size, lr => t.lr, dropout => t.dropout,
          alpha => t.hp.alpha, beta => t.hp.beta, gamma => t.hp.gamma, layers => t.hp.layers);
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    let mut cfg = resolve_config(&cli)?;
    match &cli.command {
        Command::Train(a) | Command::Redundancy(a) => {
            apply_train_args(&mut cfg, a);
            apply_overrides(&mut cfg, &cli.overrides)?;
            if cfg.mode == TrainMode::Full {
                cfg.train.batch_size = 0;
            }
            cfg.validate()?;
            let series_only = matches!(cli.command, Command::Redundancy(_));
            match cfg.precision {
                Precision::F64 => train_cmd::<f64>(&cfg, series_only, out),
                Precision::F32 => train_cmd::<f32>(&cfg, series_only, out),
            }
        }
        Command::Eval(a) => {
            if let Some(d) = &a.data {
                cfg.data = Some(d.clone());
            }
            apply_overrides(&mut cfg, &cli.overrides)?;
            cfg.validate()?;
            match cfg.precision {
                Precision::F64 => eval_cmd::<f64>(&cfg, a, out),
                Precision::F32 => eval_cmd::<f32>(&cfg, a, out),
            }
        }
        Command::Bench(a) => {
            if let Some(d) = &a.data {
                cfg.data = Some(d.clone());
            }
            apply_overrides(&mut cfg, &cli.overrides)?;
            cfg.validate()?;
            match cfg.precision {
                Precision::F64 => bench_cmd::<f64>(&cfg, a, out),
                Precision::F32 => bench_cmd::<f32>(&cfg, a, out),
            }
        }
        Command::OracleCheck(a) => oracle_cmd(a, cli.seed.unwrap_or(cfg.train.seed), out),
        Command::GenSbm(a) => {
            let spec = a.shape.spec(cli.seed.unwrap_or(cfg.train.seed));
            let data: Dataset = generate_sbm(&spec)?;
            write_dataset(&a.out, &data)?;
            writeln!(
                out,
                "wrote {} nodes, {} edges, {} classes to {}",
                data.num_nodes(),
                data.graph.edge_pairs().iter().filter(|(s, d)| s != d).count(),
                data.num_classes,
                a.out.display()
            )?;
            Ok(EXIT_OK)
        }
    }
}

fn data_dir(cfg: &RunConfig) -> Result<&Path> {
    cfg.data.as_deref().ok_or_else(|| Error::Config("no dataset given (use --data or `data = ...`)".into()))
}

fn train_cmd<T: Real>(cfg: &RunConfig, series_only: bool, out: &mut dyn Write) -> Result<i32> {
    let data: Dataset<T> = load_dataset_dir(data_dir(cfg)?, cfg.split_seed)?;
    let trainer = Trainer::new(&data, &cfg.train)?;
    if series_only {
        writeln!(out, "epoch,iter,redundancy")?;
        let outcome = trainer.run(|r| {
            let red = r.redundancy.map_or(String::new(), |v| format!("{v:.6e}"));
            writeln!(out, "{},{},{red}", r.epoch, r.iteration)?;
            Ok(())
        })?;
        let vals: Vec<f64> = outcome.records.iter().filter_map(|r| r.redundancy).collect();
        if !vals.is_empty() {
            writeln!(out, "# mean redundancy {:.6e}", vals.iter().sum::<f64>() / vals.len() as f64)?;
        }
        return Ok(EXIT_OK);
    }
    let dir = cfg
        .out
        .as_deref()
        .ok_or_else(|| Error::Config("no output directory given (use --out or `out = ...`)".into()))?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.resolved"), cfg.to_text())?;
    let mut metrics = MetricsWriter::create(&dir.join("metrics.csv"))?;
    let outcome = trainer.run(|r| metrics.write(r))?;
    let model = MlpFile::from(&outcome.params);
    let json = serde_json::to_string_pretty(&model).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(dir.join("model.json"), json)?;
    let mut w = BufWriter::new(File::create(dir.join("state.lzst"))?);
    outcome.state.write_checkpoint(&mut w)?;
    w.flush()?;

    let last = outcome.records.last().expect("epochs >= 1");
    writeln!(out, "epochs: {}  iterations: {}  final loss: {:.6}", last.epoch, last.iteration, last.train_loss)?;
    if let Some(v) = last.val_accuracy {
        writeln!(out, "val accuracy (lazy): {v:.4}")?;
    }
    if !data.split.test.is_empty() {
        let lazy = evaluate(&outcome.params, &outcome.state, &data, &data.split.test, &cfg.train)?;
        let conv =
            evaluate_converged(&outcome.params, &data, &data.split.test, cfg.train.hp.alpha, cfg.fixed_point_tol)?;
        writeln!(out, "test accuracy (lazy): {lazy:.4}")?;
        writeln!(out, "test accuracy (converged): {conv:.4}")?;
    }
    writeln!(out, "artifacts in {}", dir.display())?;
    Ok(EXIT_OK)
}

fn eval_cmd<T: Real>(cfg: &RunConfig, a: &EvalArgs, out: &mut dyn Write) -> Result<i32> {
    let data: Dataset<T> = load_dataset_dir(data_dir(cfg)?, cfg.split_seed)?;
    let text = fs::read_to_string(&a.model)?;
    let file: MlpFile =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", a.model.display())))?;
    let params = file.into_params::<T>()?;
    let state = match &a.state {
        Some(p) => LazyState::<T>::read_checkpoint(BufReader::new(File::open(p)?))?,
        None => LazyState::new(data.num_nodes(), data.num_classes),
    };
    if state.num_nodes() != data.num_nodes() || state.channels() != params.out_dim() {
        return Err(Error::Inconsistent(format!(
            "state is {}x{} but the dataset has {} nodes and the model {} outputs",
            state.num_nodes(),
            state.channels(),
            data.num_nodes(),
            params.out_dim()
        )));
    }
    let mask = match a.mask {
        MaskArg::Train => &data.split.train,
        MaskArg::Val => &data.split.val,
        MaskArg::Test => &data.split.test,
    };
    let lazy = evaluate(&params, &state, &data, mask, &cfg.train)?;
    let conv = evaluate_converged(&params, &data, mask, cfg.train.hp.alpha, cfg.fixed_point_tol)?;
    writeln!(out, "accuracy (lazy): {lazy:.4}")?;
    writeln!(out, "accuracy (converged): {conv:.4}")?;
    Ok(EXIT_OK)
}

fn bench_cmd<T: Real>(cfg: &RunConfig, a: &BenchArgs, out: &mut dyn Write) -> Result<i32> {
    let data: Dataset<T> = match &cfg.data {
        Some(d) => load_dataset_dir(d, cfg.split_seed)?,
        None => generate_sbm(&a.sbm.spec(cfg.train.seed))?,
    };
    let hp = cfg.train.hp;
    let mut variants: Vec<BenchVariant> = [1, 2, 4, 8]
        .into_iter()
        .map(|l| Ok(BenchVariant::new("lazy", Hyperparams::new(hp.alpha, hp.beta, hp.gamma, l)?)))
        .collect::<Result<_>>()?;
    variants.push(BenchVariant::new("appnp", Hyperparams::appnp(hp.alpha, a.appnp_layers)?));
    let rows = bench(&data, &cfg.train, &variants, a.warmup, a.epochs)?;
    writeln!(out, "variant,L,sec_per_epoch,store_bytes")?;
    for r in &rows {
        writeln!(out, "{},{},{:.6},{}", r.variant, r.layers, r.sec_per_epoch, r.store_bytes)?;
    }
    let c = data.num_classes.max(1);
    let timings = bench_diffusion(&data.graph, &[c, 2 * c], hp.alpha, hp.layers, 5, cfg.train.seed)?;
    writeln!(out, "width,diffusion_sec")?;
    for t in &timings {
        writeln!(out, "{},{:.6}", t.width, t.seconds)?;
    }
    Ok(EXIT_OK)
}

/// Random undirected graph with self-loops, about `avg_degree` neighbors per node.
fn random_graph(n: usize, avg_degree: f64, rng: &mut ChaCha8Rng) -> Result<crate::SparseGraph> {
    let p = (avg_degree / n.max(2) as f64).min(1.0);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Ok(build_graph(&edges, n)?.normalize(true))
}

fn oracle_cmd(a: &OracleArgs, seed: u64, out: &mut dyn Write) -> Result<i32> {
    if a.n == 0 || a.trials == 0 || a.width == 0 {
        return Err(Error::Config("n, trials and width must be positive".into()));
    }
    if a.n > crate::propagation::DENSE_LIMIT {
        return Err(Error::Config(format!(
            "n must be at most {} for the dense references",
            crate::propagation::DENSE_LIMIT
        )));
    }
    let tol = 1e-6;
    let steps = fixed_point_iteration_cap(a.alpha, 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut fp_max, mut ig_max) = (0.0f64, 0.0f64);
    for _ in 0..a.trials {
        let g = random_graph(a.n, 4.0, &mut rng)?;
        let vals: Vec<f64> = (0..a.n * a.width).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x_in = Matrix::new(a.n, a.width, vals)?;
        let exact = fixed_point_solve(&g, &x_in, a.alpha, 1e-12)?;
        let iterated = propagate_forward(&g, &x_in, &x_in, a.alpha, steps)?;
        fp_max = fp_max.max(iterated.sub(&exact)?.frobenius_norm());
        let implicit = implicit_grad_reference(&g, &x_in, a.alpha)?;
        let unrolled = propagate_backward(&g, &x_in, a.alpha, steps)?;
        ig_max = ig_max.max(unrolled.sub(&implicit)?.frobenius_norm());
    }
    writeln!(out, "trials: {}  n: {}  alpha: {}  steps: {steps}", a.trials, a.n, a.alpha)?;
    writeln!(out, "max fixed-point residual: {fp_max:.3e}")?;
    writeln!(out, "max implicit-gradient residual: {ig_max:.3e}")?;
    let ok = fp_max < tol && ig_max < tol;
    writeln!(out, "{}", if ok { "PASS" } else { "FAIL" })?;
    Ok(if ok { EXIT_OK } else { EXIT_RUNTIME })
}
