use super::TrainConfig;
use crate::data::Dataset;
use crate::nn::{mlp_forward, MlpParams, Mode};
use crate::propagation::{fixed_point_solve, lazy_forward_masked};
use crate::{Error, Hyperparams, LazyState, Matrix, Real, Result, Store};

/// Fraction of `mask` rows whose argmax (lowest class on ties) equals the label.
pub fn accuracy<T: Real>(logits: &Matrix<T>, labels: &[usize], mask: &[usize]) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::Empty("evaluation mask"));
    }
    if labels.len() != logits.rows() {
        return Err(Error::shape(format!("{} labels for {} rows", labels.len(), logits.rows())));
    }
    let pred = logits.argmax_rows();
    let mut correct = 0usize;
    for &r in mask {
        if r >= pred.len() {
            return Err(Error::NodeOutOfRange { id: r, num_nodes: pred.len() });
        }
        correct += usize::from(pred[r] == labels[r]);
    }
    Ok(correct as f64 / mask.len() as f64)
}

/// Eval-mode logits diffused from the feature history with `hp`.
/// Nodes the store has never seen start from their own logits.
pub fn predict_lazy<T: Real>(
    params: &MlpParams<T>,
    state: &LazyState<T>,
    data: &Dataset<T>,
    hp: &Hyperparams,
) -> Result<Matrix<T>> {
    let (x_in, _) = mlp_forward(params, &data.features, Mode::Eval)?;
    let flags = state.initialized(Store::Features);
    lazy_forward_masked(&data.graph, state.matrix(Store::Features), Some(&flags), &x_in, hp)
}

/// Accuracy on `mask` using the lazy state as-is, with
/// `cfg.inference_layers` propagation steps.
pub fn evaluate<T: Real>(
    params: &MlpParams<T>,
    state: &LazyState<T>,
    data: &Dataset<T>,
    mask: &[usize],
    cfg: &TrainConfig,
) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::Empty("evaluation mask"));
    }
    let logits = predict_lazy(params, state, data, &cfg.inference_hp())?;
    accuracy(&logits, &data.labels, mask)
}

/// Accuracy on `mask` after diffusing eval-mode logits to the fixed point.
pub fn evaluate_converged<T: Real>(
    params: &MlpParams<T>,
    data: &Dataset<T>,
    mask: &[usize],
    alpha: f64,
    tol: f64,
) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::Empty("evaluation mask"));
    }
    let (x_in, _) = mlp_forward(params, &data.features, Mode::Eval)?;
    let x = fixed_point_solve(&data.graph, &x_in, alpha, tol)?;
    accuracy(&x, &data.labels, mask)
}
