//! C ABI over the `lazygnn` library (double precision only).
//!
//! Conventions:
//!
//! * Every fallible function returns an [`LzStatus`]; on failure a message is
//!   available from [`lz_last_error_message`] on the same thread.
//! * Objects are opaque handles returned through `out` pointers
//!   and released by the matching `lz_*_free`. Passing NULL to a free function
//!   is a no-op.
//! * Matrices are row-major `double` buffers of `num_nodes * cols` values,
//!   owned by the caller.
//! * Panics never cross the boundary; they surface as `LZ_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use lazygnn::data::{generate_sbm, load_dataset_dir, Dataset, SbmSpec};
use lazygnn::nn::MlpParams;
use lazygnn::propagation::{
    fixed_point_solve, implicit_grad_reference, lazy_backward, lazy_forward, propagate_backward, propagate_forward,
};
use lazygnn::trainer::{evaluate, evaluate_converged, train_full_batch, train_mini_batch, EpochRecord, TrainConfig};
use lazygnn::{build_graph, Error, Hyperparams, LazyState, Matrix, SparseGraph};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LzStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    OutOfRange = 4,
    NotConverged = 5,
    Io = 6,
    Format = 7,
    Panic = 8,
    Other = 9,
}

/// Which node set to score in [`lz_model_evaluate`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LzMask {
    Train = 0,
    Val = 1,
    Test = 2,
}

/// Normalized graph.
pub struct LzGraph(SparseGraph);

/// Graph, features, labels and split.
pub struct LzDataset(Dataset);

/// Trained parameters, history stores and per-epoch records.
pub struct LzModel {
    params: MlpParams<f64>,
    state: LazyState<f64>,
    config: TrainConfig,
    records: Vec<EpochRecord>,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LzSbmSpec {
    pub blocks: usize,
    pub nodes_per_block: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    pub feature_noise_sigma: f64,
    pub seed: u64,
    pub train_frac: f64,
    pub val_frac: f64,
}

/// Training options; `batch_size == 0` trains full-batch. The MLP has one
/// hidden layer of `hidden` units, or none when `hidden == 0`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LzTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub seed: u64,
    pub hidden: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub layers: usize,
}

/// One epoch; `val_accuracy` and `redundancy` are NaN when not measured.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LzEpochRecord {
    pub epoch: usize,
    pub iteration: u64,
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub redundancy: f64,
    pub wall_ms: f64,
    pub store_bytes: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("NUL bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LzStatus {
    match e {
        Error::ShapeMismatch(_) | Error::Inconsistent(_) => LzStatus::ShapeMismatch,
        Error::NodeOutOfRange { .. } => LzStatus::OutOfRange,
        Error::InvalidArgument(_) | Error::EmptyGraph | Error::Empty(_) | Error::NonFinite(_) | Error::Config(_) => {
            LzStatus::InvalidArgument
        }
        Error::NotConverged { .. } | Error::Singular(_) => LzStatus::NotConverged,
        Error::Io(_) => LzStatus::Io,
        Error::Parse { .. } | Error::Format(_) => LzStatus::Format,
        _ => LzStatus::Other,
    }
}

struct Fail(LzStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(LzStatus::NullPointer, format!("{what} is NULL"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LzStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LzStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            LzStatus::Panic
        }
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn input_matrix(p: *const f64, rows: usize, cols: usize, what: &str) -> Result<Matrix, Fail> {
    if cols == 0 {
        return Err(Fail(LzStatus::InvalidArgument, format!("{what}: cols must be at least 1")));
    }
    Ok(Matrix::new(rows, cols, slice(p, rows * cols, what)?.to_vec())?)
}

unsafe fn write_matrix(m: &Matrix, out: *mut f64) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    ptr::copy_nonoverlapping(m.data().as_ptr(), out, m.data().len());
    Ok(())
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lz_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lz_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds an undirected graph from `num_edges` pairs `(src[i], dst[i])` and
/// normalizes it symmetrically.
///
/// # Safety
/// `src` and `dst` must point to `num_edges` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lz_graph_new(
    num_nodes: usize,
    src: *const usize,
    dst: *const usize,
    num_edges: usize,
    add_self_loops: bool,
    out: *mut *mut LzGraph,
) -> LzStatus {
    guard(|| {
        let s = slice(src, num_edges, "src")?;
        let d = slice(dst, num_edges, "dst")?;
        let edges: Vec<(usize, usize)> = s.iter().copied().zip(d.iter().copied()).collect();
        let g = build_graph::<f64>(&edges, num_nodes)?.normalize(add_self_loops);
        put(out, LzGraph(g))
    })
}

/// # Safety
/// `g` must be NULL or a handle from [`lz_graph_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lz_graph_free(g: *mut LzGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Node count, or 0 for NULL.
///
/// # Safety
/// `g` must be NULL or a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn lz_graph_num_nodes(g: *const LzGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.num_nodes())
}

/// Stored entries including self-loops, or 0 for NULL.
///
/// # Safety
/// `g` must be NULL or a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn lz_graph_nnz(g: *const LzGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.nnz())
}

/// `layers` steps of `X <- (1 - alpha) A X + alpha X_in` from `x0`.
///
/// # Safety
/// `x0`, `x_in` and `out` must hold `num_nodes * cols` doubles.
#[no_mangle]
pub unsafe extern "C" fn lz_propagate_forward(
    g: *const LzGraph,
    x0: *const f64,
    x_in: *const f64,
    cols: usize,
    alpha: f64,
    layers: usize,
    out: *mut f64,
) -> LzStatus {
    guard(|| {
        let g = &handle(g, "graph")?.0;
        let n = g.num_nodes();
        let x0 = input_matrix(x0, n, cols, "x0")?;
        let x_in = input_matrix(x_in, n, cols, "x_in")?;
        write_matrix(&propagate_forward(g, &x0, &x_in, alpha, layers)?, out)
    })
}

/// Truncated implicit gradient: `layers` backward steps from `grad`.
///
/// # Safety
/// `grad` and `out` must hold `num_nodes * cols` doubles.
#[no_mangle]
pub unsafe extern "C" fn lz_propagate_backward(
    g: *const LzGraph,
    grad: *const f64,
    cols: usize,
    alpha: f64,
    layers: usize,
    out: *mut f64,
) -> LzStatus {
    guard(|| {
        let g = &handle(g, "graph")?.0;
        let grad = input_matrix(grad, g.num_nodes(), cols, "grad")?;
        write_matrix(&propagate_backward(g, &grad, alpha, layers)?, out)
    })
}

/// Forward diffusion started from `(1 - beta) history + beta x_in`.
///
/// # Safety
/// `history`, `x_in` and `out` must hold `num_nodes * cols` doubles.
#[no_mangle]
pub unsafe extern "C" fn lz_lazy_forward(
    g: *const LzGraph,
    history: *const f64,
    x_in: *const f64,
    cols: usize,
    alpha: f64,
    beta: f64,
    layers: usize,
    out: *mut f64,
) -> LzStatus {
    guard(|| {
        let g = &handle(g, "graph")?.0;
        let n = g.num_nodes();
        let h = input_matrix(history, n, cols, "history")?;
        let x = input_matrix(x_in, n, cols, "x_in")?;
        let hp = Hyperparams::new(alpha, beta, 1.0, layers)?;
        write_matrix(&lazy_forward(g, &h, &x, &hp)?, out)
    })
}

/// Backward diffusion started from `(1 - gamma) history + gamma grad`.
///
/// # Safety
/// `history`, `grad` and `out` must hold `num_nodes * cols` doubles.
#[no_mangle]
pub unsafe extern "C" fn lz_lazy_backward(
    g: *const LzGraph,
    history: *const f64,
    grad: *const f64,
    cols: usize,
    alpha: f64,
    gamma: f64,
    layers: usize,
    out: *mut f64,
) -> LzStatus {
    guard(|| {
        let g = &handle(g, "graph")?.0;
        let n = g.num_nodes();
        let h = input_matrix(history, n, cols, "history")?;
        let grad = input_matrix(grad, n, cols, "grad")?;
        let hp = Hyperparams::new(alpha, 1.0, gamma, layers)?;
        write_matrix(&lazy_backward(g, &h, &grad, &hp)?, out)
    })
}

/// Fixed point `alpha (I - (1 - alpha) A)^{-1} x_in` to residual `tol`.
///
/// # Safety
/// `x_in` and `out` must hold `num_nodes * cols` doubles.
#[no_mangle]
pub unsafe extern "C" fn lz_fixed_point(
    g: *const LzGraph,
    x_in: *const f64,
    cols: usize,
    alpha: f64,
    tol: f64,
    out: *mut f64,
) -> LzStatus {
    guard(|| {
        let g = &handle(g, "graph")?.0;
        let x = input_matrix(x_in, g.num_nodes(), cols, "x_in")?;
        write_matrix(&fixed_point_solve(g, &x, alpha, tol)?, out)
    })
}

/// Exact gradient of the fixed point with respect to its input (dense solve).
///
/// # Safety
/// `grad` and `out` must hold `num_nodes * cols` doubles.
#[no_mangle]
pub unsafe extern "C" fn lz_implicit_gradient(
    g: *const LzGraph,
    grad: *const f64,
    cols: usize,
    alpha: f64,
    out: *mut f64,
) -> LzStatus {
    guard(|| {
        let g = &handle(g, "graph")?.0;
        let grad = input_matrix(grad, g.num_nodes(), cols, "grad")?;
        write_matrix(&implicit_grad_reference(g, &grad, alpha)?, out)
    })
}

/// Fills `out` with the library defaults.
///
/// # Safety
/// `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn lz_sbm_spec_default(out: *mut LzSbmSpec) {
    if let Some(o) = out.as_mut() {
        let s = SbmSpec::default();
        *o = LzSbmSpec {
            blocks: s.blocks,
            nodes_per_block: s.nodes_per_block,
            p_in: s.p_in,
            p_out: s.p_out,
            feature_dim: s.feature_dim,
            feature_noise_sigma: s.feature_noise_sigma,
            seed: s.seed,
            train_frac: s.train_frac,
            val_frac: s.val_frac,
        };
    }
}

/// # Safety
/// `spec` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lz_dataset_generate_sbm(spec: *const LzSbmSpec, out: *mut *mut LzDataset) -> LzStatus {
    guard(|| {
        let s = handle(spec, "spec")?;
        let spec = SbmSpec {
            blocks: s.blocks,
            nodes_per_block: s.nodes_per_block,
            p_in: s.p_in,
            p_out: s.p_out,
            feature_dim: s.feature_dim,
            feature_noise_sigma: s.feature_noise_sigma,
            seed: s.seed,
            train_frac: s.train_frac,
            val_frac: s.val_frac,
        };
        put(out, LzDataset(generate_sbm(&spec)?))
    })
}

/// Loads `edges.tsv`, `features.lzft`/`features.csv`, `labels.csv` and the
/// optional `splits.csv` from directory `dir` (UTF-8).
///
/// # Safety
/// `dir` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lz_dataset_load_dir(
    dir: *const c_char,
    split_seed: u64,
    out: *mut *mut LzDataset,
) -> LzStatus {
    guard(|| {
        if dir.is_null() {
            return Err(null("dir"));
        }
        let dir = CStr::from_ptr(dir)
            .to_str()
            .map_err(|_| Fail(LzStatus::InvalidArgument, "dir is not valid UTF-8".into()))?;
        put(out, LzDataset(load_dataset_dir(Path::new(dir), split_seed)?))
    })
}

/// # Safety
/// `d` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn lz_dataset_free(d: *mut LzDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// # Safety
/// `d` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn lz_dataset_num_nodes(d: *const LzDataset) -> usize {
    d.as_ref().map_or(0, |d| d.0.num_nodes())
}

/// # Safety
/// `d` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn lz_dataset_num_classes(d: *const LzDataset) -> usize {
    d.as_ref().map_or(0, |d| d.0.num_classes)
}

/// # Safety
/// `d` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn lz_dataset_feature_dim(d: *const LzDataset) -> usize {
    d.as_ref().map_or(0, |d| d.0.feature_dim())
}

/// Copy of the dataset's normalized graph; free it with [`lz_graph_free`].
///
/// # Safety
/// `d` must be a live dataset handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lz_dataset_graph(d: *const LzDataset, out: *mut *mut LzGraph) -> LzStatus {
    guard(|| put(out, LzGraph(handle(d, "dataset")?.0.graph.clone())))
}

/// # Safety
/// `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn lz_train_config_default(out: *mut LzTrainConfig) {
    if let Some(o) = out.as_mut() {
        let c = TrainConfig::default();
        *o = LzTrainConfig {
            epochs: c.epochs,
            batch_size: c.batch_size,
            lr: c.lr,
            weight_decay: c.weight_decay,
            dropout: c.dropout,
            seed: c.seed,
            hidden: c.hidden.first().copied().unwrap_or(0),
            alpha: c.hp.alpha,
            beta: c.hp.beta,
            gamma: c.hp.gamma,
            layers: c.hp.layers,
        };
    }
}

fn train_config(c: &LzTrainConfig) -> TrainConfig {
    TrainConfig {
        epochs: c.epochs,
        batch_size: c.batch_size,
        lr: c.lr,
        weight_decay: c.weight_decay,
        dropout: c.dropout,
        seed: c.seed,
        hidden: if c.hidden == 0 { vec![] } else { vec![c.hidden] },
        hp: Hyperparams { alpha: c.alpha, beta: c.beta, gamma: c.gamma, layers: c.layers },
        ..TrainConfig::default()
    }
}

/// Trains a model on `d`.
///
/// # Safety
/// `d` and `cfg` must be live/readable; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lz_train(d: *const LzDataset, cfg: *const LzTrainConfig, out: *mut *mut LzModel) -> LzStatus {
    guard(|| {
        let data = &handle(d, "dataset")?.0;
        let config = train_config(handle(cfg, "config")?);
        let run =
            if config.batch_size == 0 { train_full_batch(data, &config) } else { train_mini_batch(data, &config) }?;
        put(out, LzModel { params: run.params, state: run.state, config, records: run.records })
    })
}

/// # Safety
/// `m` must be NULL or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn lz_model_free(m: *mut LzModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of epoch records, or 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn lz_model_num_records(m: *const LzModel) -> usize {
    m.as_ref().map_or(0, |m| m.records.len())
}

/// # Safety
/// `m` must be a live model handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lz_model_record(m: *const LzModel, index: usize, out: *mut LzEpochRecord) -> LzStatus {
    guard(|| {
        let m = handle(m, "model")?;
        let r = m.records.get(index).ok_or_else(|| {
            Fail(LzStatus::OutOfRange, format!("record {index} out of range for {} epochs", m.records.len()))
        })?;
        let o = out.as_mut().ok_or_else(|| null("out"))?;
        *o = LzEpochRecord {
            epoch: r.epoch,
            iteration: r.iteration,
            train_loss: r.train_loss,
            val_accuracy: r.val_accuracy.unwrap_or(f64::NAN),
            redundancy: r.redundancy.unwrap_or(f64::NAN),
            wall_ms: r.wall_ms,
            store_bytes: r.store_bytes,
        };
        Ok(())
    })
}

/// Accuracy on one split: with the model's history stores (`converged ==
/// false`) or at the exact fixed point (`converged == true`).
///
/// # Safety
/// `m` and `d` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lz_model_evaluate(
    m: *const LzModel,
    d: *const LzDataset,
    mask: LzMask,
    converged: bool,
    out: *mut f64,
) -> LzStatus {
    guard(|| {
        let m = handle(m, "model")?;
        let data = &handle(d, "dataset")?.0;
        if data.num_nodes() != m.state.num_nodes() || data.num_classes != m.params.out_dim() {
            return Err(Fail(
                LzStatus::ShapeMismatch,
                format!(
                    "model was trained on {} nodes / {} classes, dataset has {} / {}",
                    m.state.num_nodes(),
                    m.params.out_dim(),
                    data.num_nodes(),
                    data.num_classes
                ),
            ));
        }
        let nodes = match mask {
            LzMask::Train => &data.split.train,
            LzMask::Val => &data.split.val,
            LzMask::Test => &data.split.test,
        };
        let acc = if converged {
            evaluate_converged(&m.params, data, nodes, m.config.hp.alpha, 1e-8)?
        } else {
            evaluate(&m.params, &m.state, data, nodes, &m.config)?
        };
        *out.as_mut().ok_or_else(|| null("out"))? = acc;
        Ok(())
    })
}
