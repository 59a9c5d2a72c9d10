//! Trainable parameter storage.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

/// How a parameter enters the forward pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    /// Real weights that are max-binarized before use. Trained with the straight-through rule;
    /// not differentiable in the classical sense.
    Binarized,
    /// Ordinary weights or biases.
    Dense,
}

/// Values, accumulated gradient and momentum buffer of one named parameter group.
///
/// The three buffers always have the same length.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    name: String,
    kind: ParamKind,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    pub momentum: Vec<f64>,
}

impl Parameter {
    pub fn new(name: impl Into<String>, kind: ParamKind, value: Vec<f64>) -> Self {
        let n = value.len();
        Parameter { name: name.into(), kind, value, grad: vec![0.0; n], momentum: vec![0.0; n] }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub(crate) fn set_name(&mut self, name: String) {
        self.name = name;
    }

    pub fn kind(&self) -> ParamKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}
