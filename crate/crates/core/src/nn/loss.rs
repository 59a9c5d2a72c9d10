use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Softmax probabilities, computed with the largest logit subtracted.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&z| libm::exp(z - m)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Cross-entropy of the softmax of `logits` against `target`, and its gradient on the logits.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if logits.len() < 2 {
        return Err(Error::invalid("softmax cross-entropy needs at least two classes"));
    }
    if target >= logits.len() {
        return Err(Error::OutOfRange(format!("target {target} with {} classes", logits.len())));
    }
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = libm::log(logits.iter().map(|&z| libm::exp(z - m)).sum::<f64>());
    let loss = log_sum - (logits[target] - m);
    let mut grad = softmax(logits);
    grad[target] -= 1.0;
    Ok((loss, grad))
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    crate::framework::argmax_cell(values)
}
