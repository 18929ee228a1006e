use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Real, Result};

/// One affine layer, `y = x W + b` with `W` of shape `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T = f64> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

/// Multilayer perceptron: rectifier between layers, identity at the output,
/// inverted dropout after every hidden activation.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<T = f64> {
    pub layers: Vec<Linear<T>>,
    pub dropout: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    /// Dropout masks are a pure function of `seed`, the layer and the row id.
    Train {
        seed: u64,
    },
}

/// Activations kept by a training-mode forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T = f64> {
    input: Matrix<T>,
    /// Pre-activation of every layer, including the output logits.
    pre: Vec<Matrix<T>>,
    /// Post-activation (after rectifier and dropout) of every hidden layer.
    post: Vec<Matrix<T>>,
    /// Inverted-dropout multipliers per hidden layer, entries `0` or `1/(1-p)`.
    masks: Vec<Option<Matrix<T>>>,
}

impl<T> ForwardCache<T> {
    pub fn masks(&self) -> &[Option<Matrix<T>>] {
        &self.masks
    }
}

/// Gradients laid out like [`MlpParams::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads<T = f64> {
    pub layers: Vec<Linear<T>>,
}

impl<T: Real> MlpGrads<T> {
    pub fn flatten(&self) -> Vec<T> {
        flatten_layers(&self.layers)
    }
}

fn flatten_layers<T: Real>(layers: &[Linear<T>]) -> Vec<T> {
    let mut out = Vec::new();
    for l in layers {
        out.extend_from_slice(l.weight.data());
        out.extend_from_slice(&l.bias);
    }
    out
}

impl<T: Real> MlpParams<T> {
    /// Glorot-uniform weights and zero biases for layer widths `dims`
    /// (input width first, class count last).
    pub fn glorot(dims: &[usize], dropout: f64, seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::invalid(format!("MLP needs at least two positive widths, got {dims:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..fan_in * fan_out).map(|_| T::lit(rng.random_range(-limit..limit))).collect();
                Linear { weight: Matrix::from_vec_unchecked(fan_in, fan_out, data), bias: vec![T::zero(); fan_out] }
            })
            .collect();
        Self::from_layers(layers, dropout)
    }

    pub fn from_layers(layers: Vec<Linear<T>>, dropout: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("MLP layer list"));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::invalid(format!("dropout must lie in [0, 1), got {dropout}")));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weight.cols() {
                return Err(Error::shape(format!(
                    "layer {i}: bias has {} entries for {} outputs",
                    l.bias.len(),
                    l.weight.cols()
                )));
            }
            if i > 0 && layers[i - 1].weight.cols() != l.weight.rows() {
                return Err(Error::shape(format!(
                    "layer {i} expects {} inputs but layer {} emits {}",
                    l.weight.rows(),
                    i - 1,
                    layers[i - 1].weight.cols()
                )));
            }
            if !l.weight.is_finite() || l.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::NonFinite("MLP parameters"));
            }
        }
        Ok(Self { layers, dropout })
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weight.cols()
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.in_dim()).chain(self.layers.iter().map(|l| l.weight.cols())).collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.data().len() + l.bias.len()).sum()
    }

    /// Weights then bias, layer by layer.
    pub fn flatten(&self) -> Vec<T> {
        flatten_layers(&self.layers)
    }

    pub fn set_flat(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::shape(format!(
                "{} parameters supplied for an MLP with {}",
                flat.len(),
                self.num_params()
            )));
        }
        let mut off = 0;
        for l in &mut self.layers {
            let w = l.weight.data_mut();
            w.copy_from_slice(&flat[off..off + w.len()]);
            off += w.len();
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    pub(crate) fn slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for l in &mut self.layers {
            out.push(l.weight.data_mut());
            out.push(l.bias.as_mut_slice());
        }
        out
    }

    pub fn cast<U: Real>(&self) -> MlpParams<U> {
        MlpParams {
            layers: self
                .layers
                .iter()
                .map(|l| Linear { weight: l.weight.cast(), bias: l.bias.iter().map(|b| U::lit(b.as_f64())).collect() })
                .collect(),
            dropout: self.dropout,
        }
    }
}

/// Forward pass with dropout rows keyed `0..x.rows()`.
pub fn mlp_forward<T: Real>(
    p: &MlpParams<T>,
    x: &Matrix<T>,
    mode: Mode,
) -> Result<(Matrix<T>, Option<ForwardCache<T>>)> {
    let ids: Vec<usize> = (0..x.rows()).collect();
    mlp_forward_with_ids(p, x, mode, &ids)
}

/// Forward pass where row `r` draws its dropout mask from `row_ids[r]`, so a
/// node gets the same mask whether it appears in a full batch or a subgraph.
pub fn mlp_forward_with_ids<T: Real>(
    p: &MlpParams<T>,
    x: &Matrix<T>,
    mode: Mode,
    row_ids: &[usize],
) -> Result<(Matrix<T>, Option<ForwardCache<T>>)> {
    if x.cols() != p.in_dim() {
        return Err(Error::shape(format!("MLP expects {} input features, got {}", p.in_dim(), x.cols())));
    }
    if row_ids.len() != x.rows() {
        return Err(Error::shape(format!("{} row ids for {} rows", row_ids.len(), x.rows())));
    }
    let last = p.layers.len() - 1;
    let mut pre = Vec::with_capacity(p.layers.len());
    let mut post = Vec::with_capacity(last);
    let mut masks = Vec::with_capacity(last);
    let mut h = x.clone();
    for (i, layer) in p.layers.iter().enumerate() {
        let mut z = h.matmul(&layer.weight)?;
        for r in 0..z.rows() {
            for (v, &b) in z.row_mut(r).iter_mut().zip(&layer.bias) {
                *v += b;
            }
        }
        if i == last {
            pre.push(z);
            break;
        }
        let mut a = z.map(|v| if v > T::zero() { v } else { T::zero() });
        let mask = match mode {
            Mode::Train { seed } if p.dropout > 0.0 => {
                let m = dropout_mask(seed, i, row_ids, a.cols(), p.dropout);
                for (v, &k) in a.data_mut().iter_mut().zip(m.data()) {
                    *v *= k;
                }
                Some(m)
            }
            _ => None,
        };
        pre.push(z);
        masks.push(mask);
        post.push(a.clone());
        h = a;
    }
    let out = pre[last].clone();
    let cache = match mode {
        Mode::Train { .. } => Some(ForwardCache { input: x.clone(), pre, post, masks }),
        Mode::Eval => None,
    };
    Ok((out, cache))
}

/// Inverted-dropout multipliers drawn from a counter-based stream: the ChaCha
/// stream is the layer, the word position the row id.
pub fn dropout_mask<T: Real>(seed: u64, layer: usize, row_ids: &[usize], width: usize, rate: f64) -> Matrix<T> {
    let keep = T::lit(1.0 / (1.0 - rate));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(layer as u64);
    let mut data = Vec::with_capacity(row_ids.len() * width);
    for &id in row_ids {
        // one u64 (two words) per unit
        rng.set_word_pos((id as u128) * (width as u128) * 2);
        for _ in 0..width {
            let u: f64 = rng.random();
            data.push(if u < rate { T::zero() } else { keep });
        }
    }
    Matrix::from_vec_unchecked(row_ids.len(), width, data)
}

/// Reverse-mode gradients of the cached forward map given `dL/d(output)`.
pub fn mlp_backward<T: Real>(
    p: &MlpParams<T>,
    cache: Option<&ForwardCache<T>>,
    grad_out: &Matrix<T>,
) -> Result<MlpGrads<T>> {
    let cache = cache.ok_or(Error::MissingCache)?;
    if cache.pre.len() != p.layers.len() {
        return Err(Error::shape("forward cache does not match the MLP depth"));
    }
    let out_shape = cache.pre[p.layers.len() - 1].shape();
    if grad_out.shape() != out_shape {
        return Err(Error::shape(format!(
            "output gradient is {}x{}, forward output was {}x{}",
            grad_out.rows(),
            grad_out.cols(),
            out_shape.0,
            out_shape.1
        )));
    }
    let mut grads: Vec<Linear<T>> = Vec::with_capacity(p.layers.len());
    let mut delta = grad_out.clone();
    for i in (0..p.layers.len()).rev() {
        let input = if i == 0 { &cache.input } else { &cache.post[i - 1] };
        let weight = input.t_matmul(&delta)?;
        let bias = delta.column_sums();
        grads.push(Linear { weight, bias });
        if i == 0 {
            break;
        }
        let mut back = delta.matmul_t(&p.layers[i].weight)?;
        let z = &cache.pre[i - 1];
        let mask = cache.masks[i - 1].as_ref();
        for (k, g) in back.data_mut().iter_mut().enumerate() {
            if z.data()[k] <= T::zero() {
                *g = T::zero();
            } else if let Some(m) = mask {
                *g *= m.data()[k];
            }
        }
        delta = back;
    }
    grads.reverse();
    Ok(MlpGrads { layers: grads })
}

/// Plain-`f64` form used for model files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpFile {
    pub dims: Vec<usize>,
    pub dropout: f64,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl<T: Real> From<&MlpParams<T>> for MlpFile {
    fn from(p: &MlpParams<T>) -> Self {
        MlpFile {
            dims: p.dims(),
            dropout: p.dropout,
            weights: p.layers.iter().map(|l| l.weight.to_f64_vec()).collect(),
            biases: p.layers.iter().map(|l| l.bias.iter().map(|b| b.as_f64()).collect()).collect(),
        }
    }
}

impl MlpFile {
    pub fn into_params<T: Real>(self) -> Result<MlpParams<T>> {
        let n = self.dims.len().saturating_sub(1);
        if n == 0 || self.weights.len() != n || self.biases.len() != n {
            return Err(Error::Format("model file layer counts disagree".into()));
        }
        let layers = (0..n)
            .map(|i| {
                Ok(Linear {
                    weight: Matrix::from_f64(self.dims[i], self.dims[i + 1], &self.weights[i])?,
                    bias: self.biases[i].iter().map(|&b| T::lit(b)).collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        MlpParams::from_layers(layers, self.dropout)
    }
}
