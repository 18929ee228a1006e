//! Graph diffusion: the denoising objective, plain and lazy propagation in both
//! directions, and dense reference solutions for the fixed point and its
//! implicit gradient.
//!
//! With `B = (1 - alpha) * A` the forward recursion is
//! `X_{l+1} = B X_l + alpha X_in`, a gradient step on
//! `||X - X_in||^2 + (1/alpha - 1) tr(X^T (I - A) X)` whose unique minimizer is
//! `X* = alpha (I - B)^{-1} X_in`. Because `A` is symmetric the backward
//! recursion `G_l = B G_{l+1} + alpha dL/dX_L` has the same shape, and its
//! fixed point is the implicit gradient `alpha (I - B)^{-1} dL/dX*`.
//!
//! The lazy variants start the recursion from a convex mix of a stored history
//! and the current input instead of from the input alone.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::{Error, Matrix, Real, Result, SparseGraph};

/// Largest graph the dense oracles will factor.
pub const DENSE_LIMIT: usize = 512;

/// Ceiling on fixed-point iterations regardless of the requested tolerance.
pub const MAX_FIXED_POINT_ITERS: usize = 100_000;

/// Diffusion hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    /// Teleport weight in `(0, 1]`.
    pub alpha: f64,
    /// Weight of the current input when mixing with the forward history, `[0, 1]`.
    pub beta: f64,
    /// Weight of the current gradient when mixing with the backward history, `[0, 1]`.
    pub gamma: f64,
    /// Propagation layers per iteration, at least 1.
    pub layers: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self { alpha: 0.1, beta: 0.5, gamma: 0.5, layers: 2 }
    }
}

impl Hyperparams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, layers: usize) -> Result<Self> {
        let hp = Self { alpha, beta, gamma, layers };
        hp.validate()?;
        Ok(hp)
    }

    /// Plain APPNP: both histories disabled.
    pub fn appnp(alpha: f64, layers: usize) -> Result<Self> {
        Self::new(alpha, 1.0, 1.0, layers)
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        for (name, v) in [("beta", self.beta), ("gamma", self.gamma)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.layers == 0 {
            return Err(Error::invalid("at least one propagation layer is required"));
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    Ok(())
}

fn check_pair<T: Real>(g: &SparseGraph<T>, a: &Matrix<T>, b: &Matrix<T>, what: &str) -> Result<()> {
    g.check_rows(a)?;
    a.ensure_same_shape(b, what)
}

/// `||X - X_in||_F^2 + (1/alpha - 1) tr(X^T (I - A) X)`.
pub fn denoise_objective<T: Real>(g: &SparseGraph<T>, x: &Matrix<T>, x_in: &Matrix<T>, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_pair(g, x, x_in, "denoise_objective")?;
    let fidelity: f64 = x
        .data()
        .iter()
        .zip(x_in.data())
        .map(|(a, b)| {
            let d = a.as_f64() - b.as_f64();
            d * d
        })
        .sum();
    if alpha == 1.0 {
        return Ok(fidelity);
    }
    let ax = g.spmm(x)?;
    let smooth: f64 = x.data().iter().zip(ax.data()).map(|(a, b)| a.as_f64() * (a.as_f64() - b.as_f64())).sum();
    Ok(fidelity + (1.0 / alpha - 1.0) * smooth)
}

/// `L` steps of `X_{l+1} = (1 - alpha) A X_l + alpha X_in` from `x0`.
pub fn propagate_forward<T: Real>(
    g: &SparseGraph<T>,
    x0: &Matrix<T>,
    x_in: &Matrix<T>,
    alpha: f64,
    layers: usize,
) -> Result<Matrix<T>> {
    check_alpha(alpha)?;
    check_pair(g, x0, x_in, "propagate_forward")?;
    Ok(diffuse_steps(g, x0.clone(), x_in, alpha, layers))
}

fn diffuse_steps<T: Real>(
    g: &SparseGraph<T>,
    start: Matrix<T>,
    anchor: &Matrix<T>,
    alpha: f64,
    layers: usize,
) -> Matrix<T> {
    let scale = T::lit(1.0 - alpha);
    let shift = T::lit(alpha);
    let mut x = start;
    for _ in 0..layers {
        x = g.diffuse(&x, scale, anchor, shift);
    }
    x
}

/// Row-wise convex mix `(1 - keep) * history + keep * current`.
///
/// Rows whose `initialized` flag is false take `current` unchanged, and
/// `keep == 1` returns `current` without touching the history at all.
pub fn mix_history<T: Real>(
    history: &Matrix<T>,
    current: &Matrix<T>,
    keep: f64,
    initialized: Option<&[bool]>,
) -> Result<Matrix<T>> {
    history.ensure_same_shape(current, "mix_history")?;
    if !(0.0..=1.0).contains(&keep) {
        return Err(Error::invalid(format!("mixing weight must lie in [0, 1], got {keep}")));
    }
    if let Some(flags) = initialized {
        if flags.len() != current.rows() {
            return Err(Error::shape(format!("{} initialization flags for {} rows", flags.len(), current.rows())));
        }
    }
    if keep == 1.0 {
        return Ok(current.clone());
    }
    let (a, b) = (T::lit(1.0 - keep), T::lit(keep));
    let mut out = current.clone();
    for r in 0..out.rows() {
        if initialized.is_some_and(|f| !f[r]) {
            continue;
        }
        for (o, &h) in out.row_mut(r).iter_mut().zip(history.row(r)) {
            *o = a * h + b * *o;
        }
    }
    Ok(out)
}

/// One lazy forward pass: start from `(1 - beta) history + beta x_in`, then
/// run `hp.layers` diffusion steps. The result is the next history.
pub fn lazy_forward<T: Real>(
    g: &SparseGraph<T>,
    history: &Matrix<T>,
    x_in: &Matrix<T>,
    hp: &Hyperparams,
) -> Result<Matrix<T>> {
    lazy_forward_masked(g, history, None, x_in, hp)
}

/// [`lazy_forward`] with per-row cold-start flags: rows without history start
/// from `x_in`.
pub fn lazy_forward_masked<T: Real>(
    g: &SparseGraph<T>,
    history: &Matrix<T>,
    initialized: Option<&[bool]>,
    x_in: &Matrix<T>,
    hp: &Hyperparams,
) -> Result<Matrix<T>> {
    hp.validate()?;
    check_pair(g, history, x_in, "lazy_forward")?;
    let x0 = mix_history(history, x_in, hp.beta, initialized)?;
    Ok(diffuse_steps(g, x0, x_in, hp.alpha, hp.layers))
}

/// `L` steps of `G_l = (1 - alpha) A G_{l+1} + alpha grad_top` from `G_L = grad_top`.
pub fn propagate_backward<T: Real>(
    g: &SparseGraph<T>,
    grad_top: &Matrix<T>,
    alpha: f64,
    layers: usize,
) -> Result<Matrix<T>> {
    check_alpha(alpha)?;
    g.check_rows(grad_top)?;
    Ok(diffuse_steps(g, grad_top.clone(), grad_top, alpha, layers))
}

/// One lazy backward pass: start from `(1 - gamma) grad_history + gamma grad_top`
/// and run the backward recursion. The result approximates `dL/dX_in` and is
/// the next gradient history.
pub fn lazy_backward<T: Real>(
    g: &SparseGraph<T>,
    grad_history: &Matrix<T>,
    grad_top: &Matrix<T>,
    hp: &Hyperparams,
) -> Result<Matrix<T>> {
    lazy_backward_masked(g, grad_history, None, grad_top, hp)
}

pub fn lazy_backward_masked<T: Real>(
    g: &SparseGraph<T>,
    grad_history: &Matrix<T>,
    initialized: Option<&[bool]>,
    grad_top: &Matrix<T>,
    hp: &Hyperparams,
) -> Result<Matrix<T>> {
    hp.validate()?;
    check_pair(g, grad_history, grad_top, "lazy_backward")?;
    let start = mix_history(grad_history, grad_top, hp.gamma, initialized)?;
    Ok(diffuse_steps(g, start, grad_top, hp.alpha, hp.layers))
}

/// Frobenius norm of `X - X_in + (1/alpha - 1)(I - A) X`, the stationarity
/// residual of the denoising objective.
pub fn fixed_point_residual<T: Real>(g: &SparseGraph<T>, x: &Matrix<T>, x_in: &Matrix<T>, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_pair(g, x, x_in, "fixed_point_residual")?;
    let ax = g.spmm(x)?;
    let c = 1.0 / alpha - 1.0;
    Ok(x.data()
        .iter()
        .zip(x_in.data())
        .zip(ax.data())
        .map(|((&x, &xi), &ax)| {
            let (x, xi, ax) = (x.as_f64(), xi.as_f64(), ax.as_f64());
            let r = x - xi + c * (x - ax);
            r * r
        })
        .sum::<f64>()
        .sqrt())
}

/// Iteration budget for reaching `tol` from `X_0 = X_in`.
///
/// The initial residual is at most `2 (1 - alpha) / alpha * ||X_in||` and each
/// step contracts it by `1 - alpha`.
pub fn fixed_point_iteration_cap(alpha: f64, tol: f64) -> usize {
    if alpha >= 1.0 {
        return 1;
    }
    let needed = (tol * alpha / 2.0).ln() / (1.0 - alpha).ln();
    if !needed.is_finite() {
        return MAX_FIXED_POINT_ITERS;
    }
    ((needed.max(0.0).ceil() as usize) + 16).min(MAX_FIXED_POINT_ITERS)
}

/// Solves `X = (1 - alpha) A X + alpha X_in` so that the stationarity residual
/// is at most `tol * (1 + ||X_in||_F)`.
///
/// Graphs up to [`DENSE_LIMIT`] nodes are solved directly by a Cholesky
/// factorization; larger ones iterate the forward recursion.
pub fn fixed_point_solve<T: Real>(g: &SparseGraph<T>, x_in: &Matrix<T>, alpha: f64, tol: f64) -> Result<Matrix<T>> {
    check_alpha(alpha)?;
    g.check_rows(x_in)?;
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    if alpha == 1.0 {
        return Ok(x_in.clone());
    }
    let threshold = tol * (1.0 + x_in.frobenius_norm());
    if g.num_nodes() <= DENSE_LIMIT {
        let x = Resolvent::new(g, alpha)?.apply(x_in, alpha);
        let residual = fixed_point_residual(g, &x, x_in, alpha)?;
        if residual > threshold {
            return Err(Error::NotConverged { iterations: 0, residual });
        }
        return Ok(x);
    }
    let cap = fixed_point_iteration_cap(alpha, tol);
    let (scale, shift) = (T::lit(1.0 - alpha), T::lit(alpha));
    let mut x = x_in.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..cap {
        let next = g.diffuse(&x, scale, x_in, shift);
        // g(X) = (X - T(X)) / alpha
        residual = next.sub(&x)?.frobenius_norm() / alpha;
        x = next;
        if residual <= threshold {
            return Ok(x);
        }
    }
    Err(Error::NotConverged { iterations: cap, residual })
}

/// Exact `dL/dX_in = alpha (I - (1 - alpha) A)^{-1} dL/dX*`, one linear solve
/// per feature column. Dense, so limited to [`DENSE_LIMIT`] nodes.
pub fn implicit_grad_reference<T: Real>(
    g: &SparseGraph<T>,
    grad_at_fixed_point: &Matrix<T>,
    alpha: f64,
) -> Result<Matrix<T>> {
    check_alpha(alpha)?;
    g.check_rows(grad_at_fixed_point)?;
    if g.num_nodes() > DENSE_LIMIT {
        return Err(Error::invalid(format!(
            "dense implicit gradient limited to {DENSE_LIMIT} nodes, graph has {}",
            g.num_nodes()
        )));
    }
    if alpha == 1.0 {
        return Ok(grad_at_fixed_point.clone());
    }
    Ok(Resolvent::new(g, alpha)?.apply(grad_at_fixed_point, alpha))
}

/// Cholesky factor of `I - (1 - alpha) A`, symmetric positive definite
/// whenever `alpha > 0` and the spectral radius of `A` is at most one.
struct Resolvent {
    chol: Cholesky<f64, Dyn>,
}

impl Resolvent {
    fn new<T: Real>(g: &SparseGraph<T>, alpha: f64) -> Result<Self> {
        let n = g.num_nodes();
        let mut m = DMatrix::<f64>::identity(n, n);
        for i in 0..n {
            let (cols, vals) = g.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m[(i, j)] -= (1.0 - alpha) * v.as_f64();
            }
        }
        let chol =
            Cholesky::new(m).ok_or_else(|| Error::Singular(format!("I - (1 - {alpha}) A is not positive definite")))?;
        Ok(Self { chol })
    }

    /// `scale * (I - (1 - alpha) A)^{-1} rhs`.
    fn apply<T: Real>(&self, rhs: &Matrix<T>, scale: f64) -> Matrix<T> {
        let (n, c) = rhs.shape();
        let b = DMatrix::<f64>::from_fn(n, c, |i, j| scale * rhs.get(i, j).as_f64());
        let x = self.chol.solve(&b);
        let mut out = Matrix::zeros(n, c);
        for i in 0..n {
            for j in 0..c {
                out.set(i, j, T::lit(x[(i, j)]));
            }
        }
        out
    }
}
