use alloc::format;

use crate::error::{Error, Result};
use crate::param::Parameter;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 0.01, weight_decay: 0.0005, momentum: 0.9, epochs: 10, batch_size: 16, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!("learning_rate must be finite and >= 0, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid(format!("momentum must be in [0, 1), got {}", self.momentum)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid(format!("weight_decay must be finite and >= 0, got {}", self.weight_decay)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch_size must be positive"));
        }
        Ok(())
    }
}

/// Heavy-ball SGD: `v ← μ·v − lr·(g + wd·w)`, `w ← w + v`, then the gradient is cleared.
pub fn sgd_step<'a>(params: impl IntoIterator<Item = &'a mut Parameter>, config: &TrainConfig) {
    for p in params {
        let Parameter { value, grad, momentum, .. } = p;
        for ((w, g), v) in value.iter_mut().zip(grad.iter_mut()).zip(momentum.iter_mut()) {
            *v = config.momentum * *v - config.learning_rate * (*g + config.weight_decay * *w);
            *w += *v;
            *g = 0.0;
        }
    }
}
