use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub leaky_slope: f64,
    /// Fraction of units dropped after each hidden dense layer.
    pub dropout_rate: f64,
    pub bn_momentum: f64,
    pub bn_epsilon: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Probabilities are clamped to `[eps, 1 - eps]` before the log in the loss.
    pub prob_clamp: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            learning_rate: 1e-3,
            epochs: 30,
            leaky_slope: 0.3,
            dropout_rate: 0.8,
            bn_momentum: 0.99,
            bn_epsilon: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-7,
            prob_clamp: 1e-7,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::domain(format!("invalid training config: {what}")));
        if self.batch_size == 0 {
            return bad("batch_size must be ≥ 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.bn_momentum) {
            return bad("bn_momentum must lie in [0, 1]");
        }
        if !(self.bn_epsilon > 0.0) {
            return bad("bn_epsilon must be positive");
        }
        if !((0.0..1.0).contains(&self.adam_beta1) && (0.0..1.0).contains(&self.adam_beta2)) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.adam_epsilon > 0.0) {
            return bad("adam_epsilon must be positive");
        }
        if !(self.prob_clamp > 0.0 && self.prob_clamp < 0.5) {
            return bad("prob_clamp must lie in (0, 0.5)");
        }
        if !self.leaky_slope.is_finite() {
            return bad("leaky_slope");
        }
        Ok(())
    }
}
