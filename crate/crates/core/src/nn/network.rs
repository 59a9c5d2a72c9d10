use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::layers::{relu, relu_backward, Conv2d, Dense, MaxPool2d};
use crate::error::{Error, Result};
use crate::neuron::{MorphLayer, NeuronCache};
use crate::param::Parameter;
use crate::tensor::{Shape, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Morph(MorphLayer),
    Conv(Conv2d),
    Relu,
    MaxPool(MaxPool2d),
    /// Channel-major, then row-major, into a `n × 1 × 1` tensor.
    Flatten,
    Dense(Dense),
}

impl Layer {
    pub fn params(&self) -> Vec<&Parameter> {
        match self {
            Layer::Morph(m) => m.neurons().iter().flat_map(|n| n.params()).collect(),
            Layer::Conv(c) => c.params().iter().collect(),
            Layer::Dense(d) => d.params().iter().collect(),
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        match self {
            Layer::Morph(m) => m.neurons_mut().iter_mut().flat_map(|n| n.params_mut()).collect(),
            Layer::Conv(c) => c.params_mut().iter_mut().collect(),
            Layer::Dense(d) => d.params_mut().iter_mut().collect(),
            _ => Vec::new(),
        }
    }

    fn output_shape(&self, input: Shape) -> Result<Shape> {
        match self {
            Layer::Morph(m) => {
                if m.input_shape() != input {
                    return Err(Error::shape("Network", format!("morphological layer built for {}, fed {input}", m.input_shape())));
                }
                Ok(m.output_shape())
            }
            Layer::Conv(c) => c.output_shape(input),
            Layer::Relu => Ok(input),
            Layer::MaxPool(p) => p.output_shape(input),
            Layer::Flatten => Ok(Shape::new(input.len(), 1, 1)),
            Layer::Dense(d) => {
                if input.len() != d.in_dim() {
                    return Err(Error::shape("Network", format!("dense layer expects {} inputs, fed {input}", d.in_dim())));
                }
                Ok(Shape::new(d.out_dim(), 1, 1))
            }
        }
    }

    fn tag(&self) -> &'static str {
        match self {
            Layer::Morph(_) => "morph",
            Layer::Conv(_) => "conv",
            Layer::Relu => "relu",
            Layer::MaxPool(_) => "maxpool",
            Layer::Flatten => "flatten",
            Layer::Dense(_) => "dense",
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Layer::Morph(m) => m.describe(),
            Layer::Conv(c) => c.describe(),
            Layer::MaxPool(p) => format!("maxpool {}x{} s{}", p.window, p.window, p.stride),
            Layer::Dense(d) => format!("dense {} -> {}", d.in_dim(), d.out_dim()),
            other => String::from(other.tag()),
        }
    }
}

/// Per-layer state saved by a training forward pass.
#[derive(Clone, Debug)]
pub enum LayerCache {
    None,
    Morph(Vec<NeuronCache>),
    Pool(Vec<usize>),
}

/// Activations and caches of one forward pass; `activations[0]` is the input.
#[derive(Clone, Debug)]
pub struct Trace {
    pub activations: Vec<Tensor>,
    pub caches: Vec<LayerCache>,
}

impl Trace {
    pub fn logits(&self) -> &[f64] {
        self.activations.last().expect("trace holds the input").data()
    }
}

/// A feed-forward stack of layers ending in class logits.
///
/// Parameters are named `<layer>.<kind>[.<neuron>].<name>`, in canonical order: layer by
/// layer, neuron by neuron.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    shapes: Vec<Shape>,
}

impl Network {
    /// Checks that consecutive shapes compose and names every parameter.
    pub fn new(input: Shape, mut layers: Vec<Layer>) -> Result<Self> {
        let mut shapes = vec![input];
        for l in &layers {
            let next = l.output_shape(*shapes.last().expect("non-empty"))?;
            shapes.push(next);
        }
        let out = *shapes.last().expect("non-empty");
        if out.height != 1 || out.width != 1 || out.channels < 2 {
            return Err(Error::shape("Network", format!("output {out} is not a vector of at least two logits")));
        }
        for (i, l) in layers.iter_mut().enumerate() {
            let tag = l.tag();
            if let Layer::Morph(m) = l {
                for (j, n) in m.neurons_mut().iter_mut().enumerate() {
                    for p in n.params_mut() {
                        let name = format!("{i}.{tag}.{j}.{}", p.name());
                        p.set_name(name);
                    }
                }
            } else {
                for p in l.params_mut() {
                    let name = format!("{i}.{tag}.{}", p.name());
                    p.set_name(name);
                }
            }
        }
        Ok(Network { layers, shapes })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_shape(&self) -> Shape {
        self.shapes[0]
    }

    /// Input shape of every layer followed by the output shape.
    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn classes(&self) -> usize {
        self.shapes.last().expect("non-empty").channels
    }

    pub fn params(&self) -> Vec<&Parameter> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Zeroed buffers matching the parameters, in canonical order.
    pub fn zero_grads(&self) -> Vec<Vec<f64>> {
        self.params().iter().map(|p| vec![0.0; p.len()]).collect()
    }

    pub fn set_dilate_reconstruction_se(&mut self, on: bool) {
        for l in &mut self.layers {
            if let Layer::Morph(m) = l {
                m.set_dilate_reconstruction_se(on);
            }
        }
    }

    pub fn describe(&self) -> String {
        let mut s = String::new();
        for (i, l) in self.layers.iter().enumerate() {
            s.push_str(&format!("{i}: {} -> {}\n", l.describe(), self.shapes[i + 1]));
        }
        s.push_str(&format!("parameters: {}\n", self.param_count()));
        s
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape() != self.shapes[0] {
            return Err(Error::shape("Network", format!("input {} does not match {}", x.shape(), self.shapes[0])));
        }
        Ok(())
    }

    /// Logits only.
    pub fn predict(&self, x: &Tensor) -> Result<Vec<f64>> {
        Ok(self.forward_until(x, self.layers.len())?.into_data())
    }

    /// Output of layer `upto − 1` (the input itself for `upto == 0`).
    pub fn forward_until(&self, x: &Tensor, upto: usize) -> Result<Tensor> {
        self.check_input(x)?;
        let mut a = x.clone();
        for l in &self.layers[..upto.min(self.layers.len())] {
            a = match l {
                Layer::Morph(m) => m.forward(&a)?.0,
                Layer::Conv(c) => c.forward(&a)?,
                Layer::Relu => relu(&a),
                Layer::MaxPool(p) => p.forward(&a)?.0,
                Layer::Flatten => {
                    let n = a.len();
                    a.reshape(Shape::new(n, 1, 1))?
                }
                Layer::Dense(d) => Tensor::new(Shape::new(d.out_dim(), 1, 1), d.forward(a.data())?)?,
            };
        }
        Ok(a)
    }

    /// Forward pass keeping everything the backward pass needs.
    pub fn forward(&self, x: &Tensor) -> Result<Trace> {
        self.check_input(x)?;
        let mut activations = vec![x.clone()];
        let mut caches = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let a = activations.last().expect("non-empty");
            let (next, cache) = match l {
                Layer::Morph(m) => {
                    let (y, c) = m.forward(a)?;
                    (y, LayerCache::Morph(c))
                }
                Layer::Conv(c) => (c.forward(a)?, LayerCache::None),
                Layer::Relu => (relu(a), LayerCache::None),
                Layer::MaxPool(p) => {
                    let (y, arg) = p.forward(a)?;
                    (y, LayerCache::Pool(arg))
                }
                Layer::Flatten => (a.clone().reshape(Shape::new(a.len(), 1, 1))?, LayerCache::None),
                Layer::Dense(d) => (Tensor::new(Shape::new(d.out_dim(), 1, 1), d.forward(a.data())?)?, LayerCache::None),
            };
            activations.push(next);
            caches.push(cache);
        }
        Ok(Trace { activations, caches })
    }

    /// Whether two forward passes took the same side of every ReLU, max-pool and morphological
    /// min/max. The network is smooth in its dense parameters between two such passes.
    pub fn same_branches(&self, a: &Trace, b: &Trace) -> bool {
        self.layers.iter().enumerate().all(|(i, l)| match (l, &a.caches[i], &b.caches[i]) {
            (Layer::Morph(m), LayerCache::Morph(ca), LayerCache::Morph(cb)) => {
                m.neurons().iter().zip(ca.iter().zip(cb)).all(|(n, (x, y))| n.same_branches(x, y))
            }
            (Layer::Relu, _, _) => a.activations[i].data().iter().zip(b.activations[i].data()).all(|(x, y)| (*x > 0.0) == (*y > 0.0)),
            (_, LayerCache::Pool(pa), LayerCache::Pool(pb)) => pa == pb,
            _ => true,
        })
    }

    /// Adds parameter gradients of `grad_logits` to `grads` (canonical order) and returns the
    /// gradient with respect to the input.
    pub fn backward(&self, trace: &Trace, grad_logits: &[f64], grads: &mut [Vec<f64>]) -> Result<Tensor> {
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut o = 0;
        for l in &self.layers {
            offsets.push(o);
            o += l.params().len();
        }
        if grads.len() != o {
            return Err(Error::shape("Network::backward", format!("{} gradient buffers for {o} parameters", grads.len())));
        }
        let mut g = Tensor::new(*self.shapes.last().expect("non-empty"), grad_logits.to_vec())?;
        for (i, l) in self.layers.iter().enumerate().rev() {
            let x = &trace.activations[i];
            let np = l.params().len();
            let lg = &mut grads[offsets[i]..offsets[i] + np];
            g = match (l, &trace.caches[i]) {
                (Layer::Morph(m), LayerCache::Morph(c)) => m.backward(x, c, &g, lg)?,
                (Layer::Conv(c), _) => c.backward(x, &g, lg)?,
                (Layer::Relu, _) => relu_backward(x, &g),
                (Layer::MaxPool(_), LayerCache::Pool(arg)) => MaxPool2d::backward(x.shape(), arg, &g),
                (Layer::Flatten, _) => g.reshape(x.shape())?,
                (Layer::Dense(d), _) => Tensor::new(x.shape(), d.backward(x.data(), g.data(), lg))?,
                _ => return Err(Error::invalid("trace does not belong to this network")),
            };
        }
        Ok(g)
    }
}
