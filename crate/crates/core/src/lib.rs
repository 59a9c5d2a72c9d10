//! Deep morphological networks on a plain CPU tensor type.
//!
//! The crate is split along the pipeline:
//!
//! - [`tensor`]: rank-3 tensors and the standard, depthwise and pointwise convolutions.
//! - [`morphology`]: classical grayscale morphology with flat structuring elements. It is the
//!   reference the trainable operators are checked against.
//! - [`framework`]: max-binarized decomposed filter banks and depthwise min/max pooling, which
//!   together compute an erosion or dilation whose structuring element is learnable.
//! - [`neuron`]: the morphological neurons (composed, opening, closing, top-hats, one-step
//!   reconstructions) and the morphological layer.
//! - [`nn`]: dense/conv/pool layers, softmax cross-entropy, SGD with momentum, the training loop
//!   and a finite-difference gradient checker.
//! - [`arch`]: builders for the network architectures and baselines.
//! - [`data`]: synthetic square/rectangle datasets, stratified splits and resizing.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is disabled. With `std`,
//! minibatch items are processed in parallel; results are bit-identical either way.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod arch;
pub mod data;
pub mod error;
pub mod framework;
pub mod morphology;
pub mod neuron;
pub mod nn;
pub mod param;
pub mod seed;
pub mod tensor;

pub use error::{Error, Result};
pub use param::{ParamKind, Parameter};
pub use tensor::{Shape, Tensor};
