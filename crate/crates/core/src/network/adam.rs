//! Adam with bias-corrected moments.

use super::model::{Gradients, Model};
use super::tensor::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One Adam update of a flat parameter group. `step` is the 1-based count
/// of updates including this one.
pub fn adam_step<T: Real>(
    params: &mut [T],
    grads: &[T],
    first: &mut [T],
    second: &mut [T],
    step: u64,
    config: &AdamConfig,
) {
    assert!(step >= 1, "Adam steps are counted from 1");
    assert!(
        params.len() == grads.len() && grads.len() == first.len() && first.len() == second.len(),
        "parameter, gradient and moment shapes differ"
    );
    let b1 = T::of(config.beta1);
    let b2 = T::of(config.beta2);
    let one = T::one();
    let t = i32::try_from(step).unwrap_or(i32::MAX);
    let c1 = T::of(1.0 - config.beta1.powi(t));
    let c2 = T::of(1.0 - config.beta2.powi(t));
    let lr = T::of(config.learning_rate);
    let eps = T::of(config.epsilon);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(first).zip(second) {
        *m = b1 * *m + (one - b1) * g;
        *v = b2 * *v + (one - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Moment accumulators for every kernel and bias of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new(model: &Model<T>) -> Self {
        let groups: Vec<Vec<T>> = model
            .layers()
            .iter()
            .flat_map(|l| {
                [
                    vec![T::zero(); l.kernels().len()],
                    vec![T::zero(); l.biases().len()],
                ]
            })
            .collect();
        Self {
            step: 0,
            first: groups.clone(),
            second: groups,
        }
    }

    pub fn update(&mut self, model: &mut Model<T>, grads: &Gradients<T>, config: &AdamConfig) {
        self.step += 1;
        for (i, (layer, g)) in model.layers_mut().iter_mut().zip(&grads.layers).enumerate() {
            let (m, v) = (2 * i, 2 * i + 1);
            let (fk, fb) = self.first.split_at_mut(v);
            let (sk, sb) = self.second.split_at_mut(v);
            adam_step(
                layer.kernels_mut(),
                &g.kernels,
                &mut fk[m],
                &mut sk[m],
                self.step,
                config,
            );
            adam_step(
                layer.biases_mut(),
                &g.biases,
                &mut fb[0],
                &mut sb[0],
                self.step,
                config,
            );
        }
    }
}
