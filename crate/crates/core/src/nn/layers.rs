//! Dense, convolutional, pooling and activation layers.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::error::{Error, Result};
use crate::param::{ParamKind, Parameter};
use crate::tensor::{conv2d_standard, conv2d_standard_backward, output_dim, Shape, Tensor};

fn uniform(rng: &mut impl Rng, n: usize, fan_in: usize) -> Vec<f64> {
    let b = 1.0 / libm::sqrt(fan_in as f64);
    (0..n).map(|_| rng.gen_range(-b..b)).collect()
}

/// Affine map `y = W x + b` with `W` stored row-major (`out × in`).
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    in_dim: usize,
    out_dim: usize,
    params: [Parameter; 2],
}

impl Dense {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let w = uniform(rng, in_dim * out_dim, in_dim);
        Dense {
            in_dim,
            out_dim,
            params: [
                Parameter::new("weight", ParamKind::Dense, w),
                Parameter::new("bias", ParamKind::Dense, vec![0.0; out_dim]),
            ],
        }
    }

    pub fn from_weights(in_dim: usize, out_dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() != in_dim * out_dim || bias.len() != out_dim {
            return Err(Error::shape("Dense", format!("{} weights / {} biases for {in_dim} -> {out_dim}", weights.len(), bias.len())));
        }
        Ok(Dense {
            in_dim,
            out_dim,
            params: [Parameter::new("weight", ParamKind::Dense, weights), Parameter::new("bias", ParamKind::Dense, bias)],
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Parameter] {
        &mut self.params
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim {
            return Err(Error::shape("Dense::forward", format!("input of length {}, expected {}", x.len(), self.in_dim)));
        }
        let w = &self.params[0].value;
        Ok(self.params[1]
            .value
            .iter()
            .enumerate()
            .map(|(o, &b)| b + dot(&w[o * self.in_dim..(o + 1) * self.in_dim], x))
            .collect())
    }

    /// Adds weight and bias gradients to `grads[0]`, `grads[1]`; returns the input gradient.
    pub fn backward(&self, x: &[f64], grad_out: &[f64], grads: &mut [Vec<f64>]) -> Vec<f64> {
        let w = &self.params[0].value;
        let mut gx = vec![0.0; self.in_dim];
        let (gw, gb) = grads.split_at_mut(1);
        for (o, &g) in grad_out.iter().enumerate() {
            gb[0][o] += g;
            if g == 0.0 {
                continue;
            }
            let row = &w[o * self.in_dim..(o + 1) * self.in_dim];
            let grow = &mut gw[0][o * self.in_dim..(o + 1) * self.in_dim];
            for ((gwi, gxi), (&wi, &xi)) in grow.iter_mut().zip(gx.iter_mut()).zip(row.iter().zip(x)) {
                *gwi += g * xi;
                *gxi += g * wi;
            }
        }
        gx
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four partial sums let the compiler vectorize without reassociating a single chain.
    let mut s = [0.0; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        for l in 0..4 {
            s[l] += a[4 * k + l] * b[4 * k + l];
        }
    }
    let mut tail = 0.0;
    for k in chunks * 4..a.len() {
        tail += a[k] * b[k];
    }
    (s[0] + s[1]) + (s[2] + s[3]) + tail
}

/// Standard convolution with bias. Weights are stored kernel by kernel, each `in × k × k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    params: [Parameter; 2],
}

impl Conv2d {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, padding: usize, rng: &mut impl Rng) -> Self {
        let fan_in = in_channels * kernel * kernel;
        Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            params: [
                Parameter::new("weight", ParamKind::Dense, uniform(rng, out_channels * fan_in, fan_in)),
                Parameter::new("bias", ParamKind::Dense, vec![0.0; out_channels]),
            ],
        }
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Parameter] {
        &mut self.params
    }

    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        if input.channels != self.in_channels {
            return Err(Error::shape("Conv2d", format!("{} input channels, expected {}", input.channels, self.in_channels)));
        }
        match (
            output_dim(input.height, self.kernel, self.stride, self.padding),
            output_dim(input.width, self.kernel, self.stride, self.padding),
        ) {
            (Some(h), Some(w)) => Ok(Shape::new(self.out_channels, h, w)),
            _ => Err(Error::shape("Conv2d", format!("kernel {} does not fit input {input}", self.kernel))),
        }
    }

    pub fn describe(&self) -> alloc::string::String {
        format!("conv {}->{} k{} s{} p{}", self.in_channels, self.out_channels, self.kernel, self.stride, self.padding)
    }

    fn kernels(&self) -> Vec<Tensor> {
        let n = self.in_channels * self.kernel * self.kernel;
        self.params[0]
            .value
            .chunks_exact(n)
            .map(|w| Tensor::new(Shape::new(self.in_channels, self.kernel, self.kernel), w.to_vec()).expect("kernel length fixed"))
            .collect()
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut y = conv2d_standard(x, &self.kernels(), self.stride, self.padding)?;
        let n = y.shape().plane_len();
        for (k, &b) in self.params[1].value.iter().enumerate() {
            y.data_mut()[k * n..(k + 1) * n].iter_mut().for_each(|v| *v += b);
        }
        Ok(y)
    }

    pub fn backward(&self, x: &Tensor, grad_out: &Tensor, grads: &mut [Vec<f64>]) -> Result<Tensor> {
        let (gx, gk) = conv2d_standard_backward(x, &self.kernels(), self.stride, self.padding, grad_out)?;
        let n = self.in_channels * self.kernel * self.kernel;
        for (k, t) in gk.iter().enumerate() {
            for (d, &s) in grads[0][k * n..(k + 1) * n].iter_mut().zip(t.data()) {
                *d += s;
            }
            grads[1][k] += grad_out.plane(k).iter().sum::<f64>();
        }
        Ok(gx)
    }
}

/// Max pooling per channel; ties go to the first cell of the window in row-major order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MaxPool2d {
    pub window: usize,
    pub stride: usize,
}

impl MaxPool2d {
    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        match (output_dim(input.height, self.window, self.stride, 0), output_dim(input.width, self.window, self.stride, 0)) {
            (Some(h), Some(w)) => Ok(Shape::new(input.channels, h, w)),
            _ => Err(Error::shape("MaxPool2d", format!("window {} does not fit input {input}", self.window))),
        }
    }

    /// Output and, per output value, the flat input index it came from.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, Vec<usize>)> {
        let os = self.output_shape(x.shape())?;
        let mut out = Tensor::zeros(os);
        let mut arg = vec![0; os.len()];
        for c in 0..os.channels {
            for i in 0..os.height {
                for j in 0..os.width {
                    let mut best = x.index(c, i * self.stride, j * self.stride);
                    for m in 0..self.window {
                        for n in 0..self.window {
                            let k = x.index(c, i * self.stride + m, j * self.stride + n);
                            if x.data()[k] > x.data()[best] {
                                best = k;
                            }
                        }
                    }
                    let o = out.index(c, i, j);
                    out.data_mut()[o] = x.data()[best];
                    arg[o] = best;
                }
            }
        }
        Ok((out, arg))
    }

    pub fn backward(input: Shape, argmax: &[usize], grad_out: &Tensor) -> Tensor {
        let mut g = Tensor::zeros(input);
        for (&k, &v) in argmax.iter().zip(grad_out.data()) {
            g.data_mut()[k] += v;
        }
        g
    }
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Passes the gradient where the input was strictly positive.
pub fn relu_backward(x: &Tensor, grad_out: &Tensor) -> Tensor {
    let mut g = grad_out.clone();
    for (d, &v) in g.data_mut().iter_mut().zip(x.data()) {
        if v <= 0.0 {
            *d = 0.0;
        }
    }
    g
}
