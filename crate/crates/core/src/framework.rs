//! Learnable erosion and dilation from max-binarized decomposed filter banks.
//!
//! A bank of side `s` holds `s²` real `s×s` filters. Each filter is max-binarized to a one-hot
//! filter, every one-hot filter is applied depthwise to every input channel, and the `s²`
//! resulting planes of each input channel are pooled with a pixelwise min (erosion) or max
//! (dilation). The union of the one-hot cells is the structuring element being learned.
//!
//! Convolving with a one-hot filter is a shifted read, so the forward pass never multiplies:
//! it reads the input at each distinct active offset and keeps the running min/max together with
//! the index of the filter that produced it ([`PoolTrace`]).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::morphology::{self, StructuringElement};
use crate::tensor::{output_dim, Kernel2D, Shape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Erosion,
    Dilation,
}

/// Index of the largest weight; ties go to the lowest row-major index.
pub fn argmax_cell(weights: &[f64]) -> usize {
    let mut best = 0;
    for (k, &w) in weights.iter().enumerate().skip(1) {
        if w > weights[best] {
            best = k;
        }
    }
    best
}

/// One-hot filter at the largest weight.
pub fn max_binarize(weights: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; weights.len()];
    if !out.is_empty() {
        out[argmax_cell(weights)] = 1.0;
    }
    out
}

/// `s²` real filters of side `s`, stored filter-major then row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank {
    size: usize,
    stride: usize,
    padding: usize,
    weights: Vec<f64>,
}

impl FilterBank {
    pub fn new(size: usize, stride: usize, padding: usize, weights: Vec<f64>) -> Result<Self> {
        if size == 0 || stride == 0 {
            return Err(Error::invalid("bank size and stride must be positive"));
        }
        if weights.len() != size.pow(4) {
            return Err(Error::shape(
                "FilterBank::new",
                format!("{} weights for {} filters of {size}x{size}", weights.len(), size * size),
            ));
        }
        Ok(FilterBank { size, stride, padding, weights })
    }

    /// A bank whose binarized filters cover exactly the active cells of `se`.
    ///
    /// Filter `f` is one-hot at the `(f mod k)`-th active cell, `k` being the number of active
    /// cells. The element must be `s×s` with its center at `(s/2, s/2)`.
    pub fn from_se(se: &StructuringElement, stride: usize, padding: usize) -> Result<Self> {
        let s = se.height();
        if se.width() != s || se.center() != (s / 2, s / 2) {
            return Err(Error::invalid("bank structuring elements must be square and centered"));
        }
        let active: Vec<usize> = (0..s * s).filter(|&k| se.mask()[k]).collect();
        let mut weights = vec![0.0; s.pow(4)];
        for f in 0..s * s {
            weights[f * s * s + active[f % active.len()]] = 1.0;
        }
        Self::new(s, stride, padding, weights)
    }

    /// Bank of one-hot filters at the given cells (row-major indices), one per filter.
    pub fn from_cells(size: usize, stride: usize, padding: usize, cells: &[usize]) -> Result<Self> {
        if cells.len() != size * size || cells.iter().any(|&c| c >= size * size) {
            return Err(Error::invalid(format!("need {} cells below {}", size * size, size * size)));
        }
        let mut weights = vec![0.0; size.pow(4)];
        for (f, &c) in cells.iter().enumerate() {
            weights[f * size * size + c] = 1.0;
        }
        Self::new(size, stride, padding, weights)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn padding(&self) -> usize {
        self.padding
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn filter(&self, f: usize) -> &[f64] {
        let n = self.size * self.size;
        &self.weights[f * n..(f + 1) * n]
    }

    /// Active cell of every binarized filter.
    pub fn cells(&self) -> Vec<usize> {
        binarized_cells(self.size, &self.weights)
    }

    pub fn binary_filters(&self) -> Vec<Kernel2D> {
        self.cells().into_iter().map(|c| Kernel2D::one_hot(self.size, c / self.size, c % self.size)).collect()
    }

    pub fn geometry(&self) -> Geometry {
        Geometry { kernel: self.size, stride: self.stride, padding: self.padding }
    }
}

pub(crate) fn binarized_cells(size: usize, weights: &[f64]) -> Vec<usize> {
    weights.chunks_exact(size * size).map(argmax_cell).collect()
}

/// Structuring element formed by the union of one-hot cells, centered at `(s/2, s/2)`.
pub fn se_from_cells(size: usize, cells: &[usize]) -> StructuringElement {
    let mut mask = vec![false; size * size];
    for &c in cells {
        mask[c] = true;
    }
    StructuringElement::new(size, size, mask, (size / 2, size / 2)).expect("one-hot cells are in range and non-empty")
}

/// Union of the binarized filters of `bank`.
pub fn recover_se(bank: &FilterBank) -> StructuringElement {
    se_from_cells(bank.size, &bank.cells())
}

/// The element dilated by a 3×3 square, on a grid grown by one cell on every side.
pub fn dilate_se_for_reconstruction(se: &StructuringElement) -> StructuringElement {
    let (h, w) = (se.height() + 2, se.width() + 2);
    let padded = Tensor::from_fn(Shape::new(1, h, w), |_, i, j| {
        if i >= 1 && j >= 1 && i <= se.height() && j <= se.width() && se.get(i - 1, j - 1) {
            1.0
        } else {
            0.0
        }
    });
    let square = morphology::make_se(morphology::SeShape::Square, 3).expect("3 is odd");
    let grown = morphology::dilate(&padded, &square);
    let (ci, cj) = se.center();
    StructuringElement::new(h, w, grown.data().iter().map(|&v| v > 0.0).collect(), (ci + 1, cj + 1))
        .expect("dilation keeps the mask non-empty")
}

/// Kernel side, stride and zero padding of a framework operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Geometry {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl Geometry {
    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        let oh = output_dim(input.height, self.kernel, self.stride, self.padding);
        let ow = output_dim(input.width, self.kernel, self.stride, self.padding);
        match (oh, ow) {
            (Some(oh), Some(ow)) => Ok(Shape::new(input.channels, oh, ow)),
            _ => Err(Error::shape(
                "morphological stage",
                format!(
                    "kernel {k}x{k} (stride {}, padding {}) does not fit input {input}",
                    self.stride,
                    self.padding,
                    k = self.kernel
                ),
            )),
        }
    }
}

/// Winning filter index per output channel and pixel of a depthwise pooling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoolTrace {
    shape: Shape,
    winners: Vec<u32>,
}

impl PoolTrace {
    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn get(&self, c: usize, i: usize, j: usize) -> usize {
        self.winners[(c * self.shape.height + i) * self.shape.width + j] as usize
    }

    pub fn winners(&self) -> &[u32] {
        &self.winners
    }
}

/// Binarize `bank`, convolve depthwise and pool per input channel.
pub fn framework_morph(direction: Direction, bank: &FilterBank, input: &Tensor) -> Result<(Tensor, PoolTrace)> {
    morph_cells(direction, bank.geometry(), &bank.cells(), input)
}

/// Framework erosion/dilation for one-hot filters given by their active cell.
pub fn morph_cells(direction: Direction, geom: Geometry, cells: &[usize], input: &Tensor) -> Result<(Tensor, PoolTrace)> {
    let out_shape = geom.output_shape(input.shape())?;
    if cells.is_empty() {
        return Err(Error::invalid("a bank needs at least one filter"));
    }
    let k = geom.kernel;
    // Distinct cells in order of first use, tagged with that first filter index. Strict
    // comparison in this order reproduces "lowest filter index wins" on ties.
    let mut distinct: Vec<(usize, u32)> = Vec::new();
    for (f, &c) in cells.iter().enumerate() {
        if c >= k * k {
            return Err(Error::OutOfRange(format!("cell {c} in a {k}x{k} filter")));
        }
        if !distinct.iter().any(|&(d, _)| d == c) {
            distinct.push((c, f as u32));
        }
    }

    let (oh, ow) = (out_shape.height, out_shape.width);
    let n = oh * ow;
    let mut out = Tensor::zeros(out_shape);
    let mut winners = vec![0u32; out_shape.len()];
    let mut shifted = vec![0.0; n];
    for l in 0..input.shape().channels {
        let dst = &mut out.data_mut()[l * n..(l + 1) * n];
        let win = &mut winners[l * n..(l + 1) * n];
        for (pos, &(cell, f)) in distinct.iter().enumerate() {
            shifted_read(input, l, geom, cell / k, cell % k, oh, ow, &mut shifted);
            if pos == 0 {
                dst.copy_from_slice(&shifted);
                win.iter_mut().for_each(|w| *w = f);
                continue;
            }
            match direction {
                Direction::Erosion => {
                    for ((d, w), &v) in dst.iter_mut().zip(win.iter_mut()).zip(&shifted) {
                        if v < *d {
                            *d = v;
                            *w = f;
                        }
                    }
                }
                Direction::Dilation => {
                    for ((d, w), &v) in dst.iter_mut().zip(win.iter_mut()).zip(&shifted) {
                        if v > *d {
                            *d = v;
                            *w = f;
                        }
                    }
                }
            }
        }
    }
    Ok((out, PoolTrace { shape: out_shape, winners }))
}

/// `buf[i·ow + j] = input[l](i·stride + m − padding, j·stride + n − padding)`, zero outside.
#[allow(clippy::too_many_arguments)]
fn shifted_read(input: &Tensor, l: usize, geom: Geometry, m: usize, n: usize, oh: usize, ow: usize, buf: &mut [f64]) {
    let Shape { height: ih, width: iw, .. } = input.shape();
    let plane = input.plane(l);
    let (s, p) = (geom.stride, geom.padding as isize);
    for i in 0..oh {
        let row = &mut buf[i * ow..(i + 1) * ow];
        let r = (i * s + m) as isize - p;
        if r < 0 || r as usize >= ih {
            row.iter_mut().for_each(|v| *v = 0.0);
            continue;
        }
        let src = &plane[r as usize * iw..(r as usize + 1) * iw];
        if s == 1 {
            // Columns j with 0 <= j + n - p < iw form one contiguous run.
            let off = n as isize - p;
            let lo = (-off).clamp(0, ow as isize) as usize;
            let hi = (iw as isize - off).clamp(0, ow as isize) as usize;
            row[..lo].iter_mut().for_each(|v| *v = 0.0);
            if hi > lo {
                let a = (lo as isize + off) as usize;
                row[lo..hi].copy_from_slice(&src[a..a + (hi - lo)]);
                row[hi..].iter_mut().for_each(|v| *v = 0.0);
            } else {
                row[lo.max(hi)..].iter_mut().for_each(|v| *v = 0.0);
            }
        } else {
            for (j, v) in row.iter_mut().enumerate() {
                let c = (j * s + n) as isize - p;
                *v = if c < 0 || c as usize >= iw { 0.0 } else { src[c as usize] };
            }
        }
    }
}

/// Adds the gradient of a framework operation to `grad_input` (routing every output gradient to
/// the pixel read by the winning filter).
pub fn morph_input_backward(
    geom: Geometry,
    cells: &[usize],
    trace: &PoolTrace,
    grad_out: &Tensor,
    grad_input: &mut Tensor,
) {
    let k = geom.kernel;
    let Shape { channels, height: oh, width: ow } = trace.shape;
    let Shape { height: ih, width: iw, .. } = grad_input.shape();
    let p = geom.padding as isize;
    for l in 0..channels {
        let g = grad_out.plane(l);
        let win = &trace.winners[l * oh * ow..(l + 1) * oh * ow];
        let gi = grad_input.plane_mut(l);
        for i in 0..oh {
            for j in 0..ow {
                let gv = g[i * ow + j];
                if gv == 0.0 {
                    continue;
                }
                let cell = cells[win[i * ow + j] as usize];
                let r = (i * geom.stride + cell / k) as isize - p;
                let c = (j * geom.stride + cell % k) as isize - p;
                if r >= 0 && c >= 0 && (r as usize) < ih && (c as usize) < iw {
                    gi[r as usize * iw + c as usize] += gv;
                }
            }
        }
    }
}

/// Adds the gradient with respect to the binary filters to `grad_bank` (`k⁴`-long for a bank of
/// side `k`): the winning filter at each output pixel receives `grad · input window`.
pub fn morph_bank_backward(geom: Geometry, input: &Tensor, trace: &PoolTrace, grad_out: &Tensor, grad_bank: &mut [f64]) {
    let k = geom.kernel;
    let Shape { channels, height: oh, width: ow } = trace.shape;
    let Shape { height: ih, width: iw, .. } = input.shape();
    let p = geom.padding as isize;
    let kk = k * k;
    for l in 0..channels {
        let g = grad_out.plane(l);
        let win = &trace.winners[l * oh * ow..(l + 1) * oh * ow];
        let x = input.plane(l);
        for i in 0..oh {
            let r0 = (i * geom.stride) as isize - p;
            for j in 0..ow {
                let gv = g[i * ow + j];
                if gv == 0.0 {
                    continue;
                }
                let f = win[i * ow + j] as usize;
                let gf = &mut grad_bank[f * kk..(f + 1) * kk];
                let c0 = (j * geom.stride) as isize - p;
                let n_lo = (-c0).clamp(0, k as isize) as usize;
                let n_hi = (iw as isize - c0).clamp(0, k as isize) as usize;
                if n_hi <= n_lo {
                    continue;
                }
                for m in 0..k {
                    let r = r0 + m as isize;
                    if r < 0 || r as usize >= ih {
                        continue;
                    }
                    let src = &x[r as usize * iw + (c0 + n_lo as isize) as usize..][..n_hi - n_lo];
                    for (w, &v) in gf[m * k + n_lo..m * k + n_hi].iter_mut().zip(src) {
                        *w += gv * v;
                    }
                }
            }
        }
    }
}

/// One-hot cells (in a `(s+2)`-side grid) of the dilated element used by a reconstruction's
/// second stage, one per active cell in row-major order.
pub fn reconstruction_cells(size: usize, cells: &[usize]) -> Vec<usize> {
    let grown = dilate_se_for_reconstruction(&se_from_cells(size, cells));
    (0..grown.mask().len()).filter(|&c| grown.mask()[c]).collect()
}
