use super::{MlpGrads, MlpParams};
use crate::{Error, Real, Result};

/// Bias-corrected Adam with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamState<T = f64> {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<T>,
    second: Vec<T>,
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &MlpParams<T>, lr: f64, weight_decay: f64) -> Self {
        let n = params.num_params();
        Self {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: vec![T::zero(); n],
            second: vec![T::zero(); n],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// `theta <- theta - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * theta`.
pub fn adam_step<T: Real>(state: &mut AdamState<T>, params: &mut MlpParams<T>, grads: &MlpGrads<T>) -> Result<()> {
    let g = grads.flatten();
    if g.len() != params.num_params() || g.len() != state.first.len() {
        return Err(Error::shape(format!(
            "{} gradients, {} parameters, {} optimizer slots",
            g.len(),
            params.num_params(),
            state.first.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let bc1 = 1.0 - b1.powi(t);
    let bc2 = 1.0 - b2.powi(t);
    let (lr, wd, eps) = (state.lr, state.weight_decay, state.eps);
    let mut k = 0;
    for slice in params.slices_mut() {
        for theta in slice.iter_mut() {
            let gk = g[k].as_f64();
            let m = b1 * state.first[k].as_f64() + (1.0 - b1) * gk;
            let v = b2 * state.second[k].as_f64() + (1.0 - b2) * gk * gk;
            state.first[k] = T::lit(m);
            state.second[k] = T::lit(v);
            let th = theta.as_f64();
            let update = lr * (m / bc1) / ((v / bc2).sqrt() + eps) + lr * wd * th;
            *theta = T::lit(th - update);
            k += 1;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Linear;
    use crate::Matrix;

    fn scalar(theta: f64) -> MlpParams {
        MlpParams::from_layers(vec![Linear { weight: Matrix::new(1, 1, vec![theta]).unwrap(), bias: vec![0.0] }], 0.0)
            .unwrap()
    }

    fn grads(w: f64, b: f64) -> MlpGrads {
        MlpGrads { layers: vec![Linear { weight: Matrix::new(1, 1, vec![w]).unwrap(), bias: vec![b] }] }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = MlpParams::<f64>::glorot(&[3, 4, 2], 0.0, 1).unwrap();
        let before = p.clone();
        let mut st = AdamState::new(&p, 0.1, 0.0);
        let zero = MlpGrads {
            layers: p
                .layers
                .iter()
                .map(|l| Linear {
                    weight: Matrix::zeros(l.weight.rows(), l.weight.cols()),
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        };
        for _ in 0..3 {
            adam_step(&mut st, &mut p, &zero).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = scalar(2.0);
        let mut st = AdamState::new(&p, 0.01, 0.0);
        adam_step(&mut st, &mut p, &grads(1.0, 0.0)).unwrap();
        let moved = 2.0 - p.layers[0].weight.get(0, 0);
        assert!((moved - 0.01).abs() < 1e-9, "moved {moved}");
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn weight_decay_is_decoupled() {
        let mut p = scalar(2.0);
        let mut st = AdamState::new(&p, 0.1, 0.5);
        adam_step(&mut st, &mut p, &grads(0.0, 0.0)).unwrap();
        assert!((p.layers[0].weight.get(0, 0) - (2.0 - 0.1 * 0.5 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn deterministic_and_shape_checked() {
        let run = || {
            let mut p = MlpParams::<f64>::glorot(&[2, 3], 0.0, 5).unwrap();
            let mut st = AdamState::new(&p, 0.05, 1e-4);
            let g = MlpGrads {
                layers: vec![Linear {
                    weight: Matrix::new(2, 3, vec![0.1, -0.2, 0.3, 0.0, 1.0, -1.0]).unwrap(),
                    bias: vec![0.5; 3],
                }],
            };
            for _ in 0..5 {
                adam_step(&mut st, &mut p, &g).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
        let mut p = scalar(1.0);
        let mut st = AdamState::new(&p, 0.1, 0.0);
        let bad = MlpGrads { layers: vec![] };
        assert!(adam_step(&mut st, &mut p, &bad).is_err());
    }
}
