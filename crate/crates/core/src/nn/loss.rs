use crate::{Error, Matrix, Real, Result};

/// Mean softmax cross-entropy over the rows listed in `mask`.
///
/// `labels[r]` is the class of row `r` (only masked rows are read). The
/// returned gradient is `dL/dlogits`; rows outside the mask are exactly zero.
pub fn softmax_cross_entropy<T: Real>(
    logits: &Matrix<T>,
    labels: &[usize],
    mask: &[usize],
) -> Result<(f64, Matrix<T>)> {
    if mask.is_empty() {
        return Err(Error::Empty("label mask"));
    }
    if labels.len() != logits.rows() {
        return Err(Error::shape(format!("{} labels for {} logit rows", labels.len(), logits.rows())));
    }
    let classes = logits.cols();
    let inv = 1.0 / mask.len() as f64;
    let mut grad = Matrix::zeros(logits.rows(), classes);
    let mut loss = 0.0;
    let mut probs = vec![0.0f64; classes];
    for &r in mask {
        if r >= logits.rows() {
            return Err(Error::NodeOutOfRange { id: r, num_nodes: logits.rows() });
        }
        let y = labels[r];
        if y >= classes {
            return Err(Error::invalid(format!("label {y} of row {r} exceeds {classes} classes")));
        }
        let row = logits.row(r);
        let max = row.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (p, &z) in probs.iter_mut().zip(row) {
            *p = (z.as_f64() - max).exp();
            sum += *p;
        }
        loss += sum.ln() - (row[y].as_f64() - max);
        let g = grad.row_mut(r);
        for (c, (gv, &p)) in g.iter_mut().zip(&probs).enumerate() {
            let target = if c == y { 1.0 } else { 0.0 };
            // duplicate mask entries accumulate, matching the duplicated loss term
            *gv += T::lit((p / sum - target) * inv);
        }
    }
    Ok((loss * inv, grad))
}
