use crate::nn::config::TrainConfig;
use crate::scalar::Scalar;

/// Adam with the step size folded into a bias-corrected learning rate:
/// `lr_t = lr · √(1 − β₂ᵗ) / (1 − β₁ᵗ)`, `θ ← θ − lr_t · m / (√v + ε)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub m: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(n_params: usize, config: &TrainConfig) -> Self {
        Self {
            learning_rate: config.learning_rate,
            beta1: config.adam_beta1,
            beta2: config.adam_beta2,
            epsilon: config.adam_epsilon,
            step: 0,
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
        }
    }

    pub fn update(&mut self, params: &mut [T], grads: &[T]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let t = self.step as i32;
        let lr_t =
            self.learning_rate * (1.0 - self.beta2.powi(t)).sqrt() / (1.0 - self.beta1.powi(t));
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let (c1, c2) = (T::one() - b1, T::one() - b2);
        let (lr_t, eps) = (T::of(lr_t), T::of(self.epsilon));
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = b1 * *m + c1 * g;
            *v = b2 * *v + c2 * g * g;
            *p -= lr_t * *m / (v.sqrt() + eps);
        }
    }
}
