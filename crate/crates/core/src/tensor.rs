//! Dense rank-3 tensors (channels × height × width) and the convolutions built on them.
//!
//! All convolutions use symmetric zero padding and produce
//! `floor((dim + 2·padding − kernel) / stride) + 1` output rows/columns.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Shape { channels, height, width }
    }

    pub const fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub const fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl core::fmt::Display for Shape {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

/// Output extent of a strided, zero-padded window sweep, or `None` when the kernel does not fit.
pub fn output_dim(dim: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    if stride == 0 || kernel == 0 || dim + 2 * padding < kernel {
        return None;
    }
    Some((dim + 2 * padding - kernel) / stride + 1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if shape.channels == 0 || shape.height == 0 || shape.width == 0 {
            return Err(Error::shape("Tensor::new", format!("zero-sized dimension in {shape}")));
        }
        if data.len() != shape.len() {
            return Err(Error::shape(
                "Tensor::new",
                format!("{} values for shape {shape} ({} expected)", data.len(), shape.len()),
            ));
        }
        Ok(Tensor { shape, data })
    }

    /// # Panics
    /// If any dimension is zero.
    pub fn zeros(shape: Shape) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        assert!(!shape.is_empty(), "tensor dimensions must be positive");
        Tensor { shape, data: vec![value; shape.len()] }
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        assert!(!shape.is_empty(), "tensor dimensions must be positive");
        let mut data = Vec::with_capacity(shape.len());
        for c in 0..shape.channels {
            for i in 0..shape.height {
                for j in 0..shape.width {
                    data.push(f(c, i, j));
                }
            }
        }
        Tensor { shape, data }
    }

    /// Single-channel tensor from row-major rows.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::shape("Tensor::from_rows", "ragged rows"));
        }
        Tensor::new(Shape::new(1, height, width), rows.iter().flat_map(|r| r.iter().copied()).collect())
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, c: usize, i: usize, j: usize) -> usize {
        (c * self.shape.height + i) * self.shape.width + j
    }

    #[inline]
    pub fn get(&self, c: usize, i: usize, j: usize) -> f64 {
        self.data[self.index(c, i, j)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, i: usize, j: usize, v: f64) {
        let k = self.index(c, i, j);
        self.data[k] = v;
    }

    /// Value at a possibly out-of-bounds coordinate; zero outside the tensor.
    #[inline]
    pub fn get_padded(&self, c: usize, i: isize, j: isize) -> f64 {
        if i < 0 || j < 0 || i as usize >= self.shape.height || j as usize >= self.shape.width {
            0.0
        } else {
            self.get(c, i as usize, j as usize)
        }
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.shape.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.shape.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    /// Channel `c` as a single-channel tensor.
    pub fn channel(&self, c: usize) -> Tensor {
        Tensor { shape: Shape::new(1, self.shape.height, self.shape.width), data: self.plane(c).to_vec() }
    }

    /// Same data under a new shape with the same element count.
    pub fn reshape(self, shape: Shape) -> Result<Self> {
        Tensor::new(shape, self.data)
    }

    /// Concatenates tensors of identical spatial size along the channel axis.
    pub fn concat_channels(parts: &[Tensor]) -> Result<Tensor> {
        let first = parts.first().ok_or_else(|| Error::shape("concat_channels", "no tensors"))?;
        let (h, w) = (first.shape.height, first.shape.width);
        let mut data = Vec::with_capacity(parts.iter().map(Tensor::len).sum());
        let mut channels = 0;
        for p in parts {
            if p.shape.height != h || p.shape.width != w {
                return Err(Error::shape(
                    "concat_channels",
                    format!("spatial size {}x{} does not match {h}x{w}", p.shape.height, p.shape.width),
                ));
            }
            channels += p.shape.channels;
            data.extend_from_slice(&p.data);
        }
        Tensor::new(Shape::new(channels, h, w), data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor { shape: self.shape, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&self, k: f64) -> Tensor {
        self.map(|v| v * k)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Crops `margin` pixels from every border of every channel.
    pub fn crop(&self, margin: usize) -> Option<Tensor> {
        let Shape { channels, height, width } = self.shape;
        if 2 * margin >= height || 2 * margin >= width {
            return None;
        }
        let s = Shape::new(channels, height - 2 * margin, width - 2 * margin);
        Some(Tensor::from_fn(s, |c, i, j| self.get(c, i + margin, j + margin)))
    }
}

/// A single-plane convolution kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel2D {
    pub height: usize,
    pub width: usize,
    pub weights: Vec<f64>,
}

impl Kernel2D {
    pub fn new(height: usize, width: usize, weights: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::shape("Kernel2D::new", "kernel dimensions must be positive"));
        }
        if weights.len() != height * width {
            return Err(Error::shape(
                "Kernel2D::new",
                format!("{} weights for a {height}x{width} kernel", weights.len()),
            ));
        }
        Ok(Kernel2D { height, width, weights })
    }

    /// Square kernel with a single 1 at `(row, col)`.
    pub fn one_hot(size: usize, row: usize, col: usize) -> Self {
        let mut weights = vec![0.0; size * size];
        weights[row * size + col] = 1.0;
        Kernel2D { height: size, width: size, weights }
    }
}

fn conv_out_shape(
    op: &'static str,
    input: Shape,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: usize,
) -> Result<(usize, usize)> {
    let oh = output_dim(input.height, kh, stride, padding);
    let ow = output_dim(input.width, kw, stride, padding);
    match (oh, ow) {
        (Some(oh), Some(ow)) => Ok((oh, ow)),
        _ => Err(Error::shape(
            op,
            format!("kernel {kh}x{kw} (stride {stride}, padding {padding}) does not fit input {input}"),
        )),
    }
}

/// Standard convolution: every kernel spans all input channels and yields one output channel.
///
/// Each kernel is a tensor of shape `(input channels, kh, kw)`.
pub fn conv2d_standard(input: &Tensor, kernels: &[Tensor], stride: usize, padding: usize) -> Result<Tensor> {
    let first = kernels.first().ok_or_else(|| Error::shape("conv2d_standard", "no kernels"))?;
    let ks = first.shape();
    for k in kernels {
        if k.shape() != ks {
            return Err(Error::shape("conv2d_standard", "kernels differ in shape"));
        }
    }
    let is = input.shape();
    if ks.channels != is.channels {
        return Err(Error::shape(
            "conv2d_standard",
            format!("kernel depth {} does not match {} input channels", ks.channels, is.channels),
        ));
    }
    let (oh, ow) = conv_out_shape("conv2d_standard", is, ks.height, ks.width, stride, padding)?;
    let mut out = Tensor::zeros(Shape::new(kernels.len(), oh, ow));
    for (k, kernel) in kernels.iter().enumerate() {
        for l in 0..is.channels {
            for m in 0..ks.height {
                for n in 0..ks.width {
                    let w = kernel.get(l, m, n);
                    if w == 0.0 {
                        continue;
                    }
                    accumulate_shifted(&mut out, k, input, l, w, m, n, stride, padding);
                }
            }
        }
    }
    Ok(out)
}

/// Adds `w · input[l](i·stride + m − padding, j·stride + n − padding)` to every pixel of `out[k]`.
#[allow(clippy::too_many_arguments)]
#[inline]
fn accumulate_shifted(
    out: &mut Tensor,
    k: usize,
    input: &Tensor,
    l: usize,
    w: f64,
    m: usize,
    n: usize,
    stride: usize,
    padding: usize,
) {
    let (oh, ow) = (out.shape.height, out.shape.width);
    let iw = input.shape.width;
    let src = input.plane(l);
    let dst = out.plane_mut(k);
    let core::ops::Range { start: j0, end: j1 } = valid_range(ow, input.shape.width, n, stride, padding);
    if j0 == j1 {
        return;
    }
    for i in valid_range(oh, input.shape.height, m, stride, padding) {
        let r = i * stride + m - padding;
        let row = &src[r * iw..(r + 1) * iw];
        let drow = &mut dst[i * ow..(i + 1) * ow];
        if stride == 1 {
            let c0 = j0 + n - padding;
            for (d, &x) in drow[j0..j1].iter_mut().zip(&row[c0..c0 + (j1 - j0)]) {
                *d += w * x;
            }
        } else {
            for (j, d) in drow.iter_mut().enumerate().take(j1).skip(j0) {
                *d += w * row[j * stride + n - padding];
            }
        }
    }
}

/// Output indices `o` in `0..out` whose tap `o·stride + offset − padding` lands inside `0..len`.
#[inline]
fn valid_range(out: usize, len: usize, offset: usize, stride: usize, padding: usize) -> core::ops::Range<usize> {
    let lo = if padding > offset { (padding - offset).div_ceil(stride) } else { 0 };
    let hi = if len + padding > offset { ((len + padding - offset - 1) / stride + 1).min(out) } else { 0 };
    lo..hi.max(lo)
}

/// Gradients of [`conv2d_standard`] with respect to its input and kernels.
pub fn conv2d_standard_backward(
    input: &Tensor,
    kernels: &[Tensor],
    stride: usize,
    padding: usize,
    grad_out: &Tensor,
) -> Result<(Tensor, Vec<Tensor>)> {
    let is = input.shape();
    let ks = kernels.first().ok_or_else(|| Error::shape("conv2d_standard_backward", "no kernels"))?.shape();
    let (oh, ow) = conv_out_shape("conv2d_standard_backward", is, ks.height, ks.width, stride, padding)?;
    if grad_out.shape() != Shape::new(kernels.len(), oh, ow) {
        return Err(Error::shape("conv2d_standard_backward", "gradient shape does not match output"));
    }
    let mut grad_in = Tensor::zeros(is);
    let mut grad_k: Vec<Tensor> = kernels.iter().map(|k| Tensor::zeros(k.shape())).collect();
    let iw = is.width;
    let plane = is.height * iw;
    for (k, kernel) in kernels.iter().enumerate() {
        let g = grad_out.plane(k);
        for l in 0..is.channels {
            let src = &input.data[l * plane..(l + 1) * plane];
            let gin = &mut grad_in.data[l * plane..(l + 1) * plane];
            for m in 0..ks.height {
                let rows = valid_range(oh, is.height, m, stride, padding);
                for n in 0..ks.width {
                    let w = kernel.get(l, m, n);
                    let core::ops::Range { start: j0, end: j1 } = valid_range(ow, iw, n, stride, padding);
                    let mut acc = 0.0;
                    for i in rows.clone() {
                        let r = i * stride + m - padding;
                        let grow = &g[i * ow..(i + 1) * ow];
                        for (j, &go) in grow.iter().enumerate().take(j1).skip(j0) {
                            let idx = r * iw + j * stride + n - padding;
                            acc += go * src[idx];
                            gin[idx] += go * w;
                        }
                    }
                    let gi = grad_k[k].index(l, m, n);
                    grad_k[k].data[gi] += acc;
                }
            }
        }
    }
    Ok((grad_in, grad_k))
}

/// Depthwise convolution: every filter is applied to every input channel separately.
///
/// Output channel `f·c + l` holds filter `f` over input channel `l` (filter-major order).
pub fn conv2d_depthwise(input: &Tensor, filters: &[Kernel2D], stride: usize, padding: usize) -> Result<Tensor> {
    let first = filters.first().ok_or_else(|| Error::shape("conv2d_depthwise", "no filters"))?;
    if filters.iter().any(|f| f.height != first.height || f.width != first.width) {
        return Err(Error::shape("conv2d_depthwise", "filters differ in size"));
    }
    let is = input.shape();
    let (oh, ow) = conv_out_shape("conv2d_depthwise", is, first.height, first.width, stride, padding)?;
    let c = is.channels;
    let mut out = Tensor::zeros(Shape::new(filters.len() * c, oh, ow));
    for (f, filter) in filters.iter().enumerate() {
        for l in 0..c {
            for m in 0..filter.height {
                for n in 0..filter.width {
                    let w = filter.weights[m * filter.width + n];
                    if w != 0.0 {
                        accumulate_shifted(&mut out, f * c + l, input, l, w, m, n, stride, padding);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Pointwise (1×1) convolution: `out[o] = Σ_l weights[o·c + l] · input[l] + bias[o]`.
pub fn conv2d_pointwise(input: &Tensor, weights: &[f64], bias: &[f64]) -> Result<Tensor> {
    let is = input.shape();
    let c_out = bias.len();
    if c_out == 0 || weights.len() != c_out * is.channels {
        return Err(Error::shape(
            "conv2d_pointwise",
            format!("{} weights / {} biases for {} input channels", weights.len(), c_out, is.channels),
        ));
    }
    let n = is.plane_len();
    let mut data = Vec::with_capacity(c_out * n);
    for o in 0..c_out {
        let mut plane = vec![bias[o]; n];
        for l in 0..is.channels {
            let w = weights[o * is.channels + l];
            for (p, &x) in plane.iter_mut().zip(input.plane(l)) {
                *p += w * x;
            }
        }
        data.extend(plane);
    }
    Tensor::new(Shape::new(c_out, is.height, is.width), data)
}

/// Gradients of [`conv2d_pointwise`]: `(grad_input, grad_weights, grad_bias)`.
pub fn conv2d_pointwise_backward(
    input: &Tensor,
    weights: &[f64],
    grad_out: &Tensor,
) -> Result<(Tensor, Vec<f64>, Vec<f64>)> {
    let is = input.shape();
    let gs = grad_out.shape();
    let c_out = gs.channels;
    if gs.height != is.height || gs.width != is.width || weights.len() != c_out * is.channels {
        return Err(Error::shape("conv2d_pointwise_backward", "gradient/weight shape mismatch"));
    }
    let mut grad_in = Tensor::zeros(is);
    let mut gw = vec![0.0; weights.len()];
    let mut gb = vec![0.0; c_out];
    for o in 0..c_out {
        let g = grad_out.plane(o);
        gb[o] = g.iter().sum();
        for l in 0..is.channels {
            let x = input.plane(l);
            gw[o * is.channels + l] = g.iter().zip(x).map(|(a, b)| a * b).sum();
            let w = weights[o * is.channels + l];
            for (d, &gv) in grad_in.plane_mut(l).iter_mut().zip(g) {
                *d += w * gv;
            }
        }
    }
    Ok((grad_in, gw, gb))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementwiseOp {
    Max,
    Min,
    Add,
    Subtract,
}

pub fn elementwise(op: ElementwiseOp, a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape != b.shape {
        return Err(Error::shape("elementwise", format!("{} vs {}", a.shape, b.shape)));
    }
    let f: fn(f64, f64) -> f64 = match op {
        ElementwiseOp::Max => f64::max,
        ElementwiseOp::Min => f64::min,
        ElementwiseOp::Add => |x, y| x + y,
        ElementwiseOp::Subtract => |x, y| x - y,
    };
    Ok(Tensor { shape: a.shape, data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect() })
}
