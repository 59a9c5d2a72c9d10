//! Classical grayscale morphology with flat structuring elements.
//!
//! Neighborhoods are clipped to the image support, and the pixel itself always takes part
//! (the element's center counts as active even if its mask cell is 0). Multi-channel inputs are
//! processed channel by channel.
//!
//! Both erosion and dilation read the neighborhood `{(i + m − ci, j + n − cj) : mask[m][n]}`
//! without reflecting the element, which is also what the decomposed-filter framework computes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeShape {
    Square,
    Disk,
    Diamond,
    Cross,
    XShape,
}

impl core::str::FromStr for SeShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(SeShape::Square),
            "disk" => Ok(SeShape::Disk),
            "diamond" => Ok(SeShape::Diamond),
            "cross" => Ok(SeShape::Cross),
            "x_shape" | "x" => Ok(SeShape::XShape),
            _ => Err(Error::invalid(format!("unknown structuring element shape `{s}`"))),
        }
    }
}

/// Binary mask with a center cell.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StructuringElement {
    height: usize,
    width: usize,
    mask: Vec<bool>,
    center: (usize, usize),
}

impl StructuringElement {
    pub fn new(height: usize, width: usize, mask: Vec<bool>, center: (usize, usize)) -> Result<Self> {
        if height == 0 || width == 0 || mask.len() != height * width {
            return Err(Error::shape(
                "StructuringElement::new",
                format!("{} cells for a {height}x{width} mask", mask.len()),
            ));
        }
        if !mask.iter().any(|&b| b) {
            return Err(Error::invalid("structuring element has no active cell"));
        }
        if center.0 >= height || center.1 >= width {
            return Err(Error::invalid(format!("center {center:?} outside a {height}x{width} mask")));
        }
        Ok(StructuringElement { height, width, mask, center })
    }

    /// Element from `0`/`1` rows, centered at `(rows/2, cols/2)`.
    pub fn from_rows(rows: &[&[u8]]) -> Result<Self> {
        let h = rows.len();
        let w = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != w) {
            return Err(Error::shape("StructuringElement::from_rows", "ragged rows"));
        }
        let mask = rows.iter().flat_map(|r| r.iter().map(|&v| v != 0)).collect();
        Self::new(h, w, mask, (h / 2, w / 2))
    }

    /// All-ones `height × width` rectangle, centered at `(height/2, width/2)`.
    pub fn rectangle(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![true; height * width], (height / 2, width / 2))
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn center(&self) -> (usize, usize) {
        self.center
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.width + col]
    }

    pub fn active_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Offsets `(row − center_row, col − center_col)` of the active cells plus the center, row-major.
    pub fn offsets(&self) -> Vec<(isize, isize)> {
        let (ci, cj) = self.center;
        let mut out = Vec::new();
        for m in 0..self.height {
            for n in 0..self.width {
                if self.get(m, n) || (m, n) == self.center {
                    out.push((m as isize - ci as isize, n as isize - cj as isize));
                }
            }
        }
        out
    }

    /// Point reflection through the center.
    pub fn reflect(&self) -> Self {
        let (h, w) = (self.height, self.width);
        let mut mask = vec![false; h * w];
        for m in 0..h {
            for n in 0..w {
                mask[(h - 1 - m) * w + (w - 1 - n)] = self.get(m, n);
            }
        }
        StructuringElement { height: h, width: w, mask, center: (h - 1 - self.center.0, w - 1 - self.center.1) }
    }

    /// Mask as a single-channel 0/1 tensor.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_fn(Shape::new(1, self.height, self.width), |_, i, j| if self.get(i, j) { 1.0 } else { 0.0 })
    }

    /// Rows of `0`/`1` characters.
    pub fn to_ascii(&self) -> alloc::string::String {
        let mut s = alloc::string::String::with_capacity(self.height * (self.width + 1));
        for m in 0..self.height {
            for n in 0..self.width {
                s.push(if self.get(m, n) { '1' } else { '0' });
            }
            s.push('\n');
        }
        s
    }
}

/// Canonical centered element of odd side `size`.
pub fn make_se(shape: SeShape, size: usize) -> Result<StructuringElement> {
    if size.is_multiple_of(2) {
        return Err(Error::invalid(format!("structuring element size must be odd and positive, got {size}")));
    }
    let r = (size / 2) as isize;
    let mut mask = Vec::with_capacity(size * size);
    for m in 0..size as isize {
        for n in 0..size as isize {
            let (di, dj) = (m - r, n - r);
            mask.push(match shape {
                SeShape::Square => true,
                SeShape::Disk => {
                    let radius = size as f64 / 2.0;
                    ((di * di + dj * dj) as f64) <= radius * radius
                }
                SeShape::Diamond => di.abs() + dj.abs() <= r,
                SeShape::Cross => di == 0 || dj == 0,
                SeShape::XShape => di.abs() == dj.abs(),
            });
        }
    }
    StructuringElement::new(size, size, mask, (size / 2, size / 2))
}

fn rank_filter(image: &Tensor, se: &StructuringElement, take_max: bool) -> Tensor {
    let s = image.shape();
    let offsets = se.offsets();
    let (h, w) = (s.height as isize, s.width as isize);
    Tensor::from_fn(s, |c, i, j| {
        let mut acc = if take_max { f64::NEG_INFINITY } else { f64::INFINITY };
        for &(di, dj) in &offsets {
            let (r, q) = (i as isize + di, j as isize + dj);
            if r < 0 || q < 0 || r >= h || q >= w {
                continue;
            }
            let v = image.get(c, r as usize, q as usize);
            acc = if take_max { acc.max(v) } else { acc.min(v) };
        }
        acc
    })
}

pub fn erode(image: &Tensor, se: &StructuringElement) -> Tensor {
    rank_filter(image, se, false)
}

pub fn dilate(image: &Tensor, se: &StructuringElement) -> Tensor {
    rank_filter(image, se, true)
}

pub fn open(image: &Tensor, se: &StructuringElement) -> Tensor {
    dilate(&erode(image, se), se)
}

pub fn close(image: &Tensor, se: &StructuringElement) -> Tensor {
    erode(&dilate(image, se), se)
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let mut out = a.clone();
    for (o, &v) in out.data_mut().iter_mut().zip(b.data()) {
        *o = f(*o, v);
    }
    out
}

/// `image − open(image)`.
pub fn white_tophat(image: &Tensor, se: &StructuringElement) -> Tensor {
    zip(image, &open(image, se), |a, b| a - b)
}

/// `close(image) − image`.
pub fn black_tophat(image: &Tensor, se: &StructuringElement) -> Tensor {
    zip(&close(image, se), image, |a, b| a - b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reconstruction {
    /// Marker `dilate(image, se)`, shrunk by geodesic erosion above `image`.
    ByErosion,
    /// Marker `erode(image, se)`, grown by geodesic dilation below `image`.
    ByDilation,
}

/// One geodesic step: `max(erode(marker, se), mask)` or `min(dilate(marker, se), mask)`.
pub fn geodesic_step(kind: Reconstruction, marker: &Tensor, mask: &Tensor, se: &StructuringElement) -> Tensor {
    match kind {
        Reconstruction::ByErosion => zip(&erode(marker, se), mask, f64::max),
        Reconstruction::ByDilation => zip(&dilate(marker, se), mask, f64::min),
    }
}

fn marker(kind: Reconstruction, image: &Tensor, se: &StructuringElement) -> Tensor {
    match kind {
        Reconstruction::ByErosion => dilate(image, se),
        Reconstruction::ByDilation => erode(image, se),
    }
}

/// Full geodesic reconstruction, iterated with `elementary_se` until no pixel changes.
///
/// # Panics
/// If convergence takes more than `h·w` iterations, which monotonicity rules out.
pub fn reconstruct(
    kind: Reconstruction,
    image: &Tensor,
    se: &StructuringElement,
    elementary_se: &StructuringElement,
) -> Tensor {
    let mut current = marker(kind, image, se);
    let bound = image.shape().plane_len() + 1;
    for _ in 0..bound {
        let next = geodesic_step(kind, &current, image, elementary_se);
        if next == current {
            return current;
        }
        current = next;
    }
    panic!("geodesic reconstruction did not converge within {bound} iterations");
}

/// One-step approximation: a single geodesic step with `se_prime` applied to the marker.
pub fn reconstruct_approx(
    kind: Reconstruction,
    image: &Tensor,
    se: &StructuringElement,
    se_prime: &StructuringElement,
) -> Tensor {
    geodesic_step(kind, &marker(kind, image, se), image, se_prime)
}
