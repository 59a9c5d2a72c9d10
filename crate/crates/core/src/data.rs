//! Synthetic datasets, stratified splits and image resizing.
//!
//! Each synthetic image is 224×224 with background 0.0 and a single axis-aligned filled shape of
//! value 1.0, placed uniformly at random with at least one background pixel between the shape
//! and every border. Sample `id` has label `id % 2`.
//!
//! | dataset      | class 0              | class 1              |
//! |--------------|----------------------|----------------------|
//! | `squares`    | 5×5 square           | 9×9 square           |
//! | `rectangles` | 7 wide × 3 tall      | 3 wide × 7 tall      |

use alloc::format;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seed::sub_seed;
use crate::tensor::{Shape, Tensor};

pub const IMAGE_SIZE: usize = 224;
pub const SYNTHETIC_COUNT: usize = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: usize,
    pub label: usize,
    pub image: Tensor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SyntheticKind {
    Squares,
    Rectangles,
}

impl SyntheticKind {
    pub fn name(self) -> &'static str {
        match self {
            SyntheticKind::Squares => "squares",
            SyntheticKind::Rectangles => "rectangles",
        }
    }

    /// `(height, width)` of the shape drawn for `label`.
    pub fn shape_of(self, label: usize) -> (usize, usize) {
        match (self, label) {
            (SyntheticKind::Squares, 0) => (5, 5),
            (SyntheticKind::Squares, _) => (9, 9),
            (SyntheticKind::Rectangles, 0) => (3, 7),
            (SyntheticKind::Rectangles, _) => (7, 3),
        }
    }
}

impl core::str::FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squares" => Ok(SyntheticKind::Squares),
            "rectangles" => Ok(SyntheticKind::Rectangles),
            _ => Err(Error::invalid(format!("unknown synthetic dataset `{s}` (expected squares or rectangles)"))),
        }
    }
}

/// Single-channel `size × size` image with one filled `h × w` block of ones at `(top, left)`.
pub fn draw_block(size: usize, (h, w): (usize, usize), (top, left): (usize, usize)) -> Tensor {
    Tensor::from_fn(Shape::new(1, size, size), |_, i, j| {
        if i >= top && i < top + h && j >= left && j < left + w {
            1.0
        } else {
            0.0
        }
    })
}

/// `count` images of side `size`; the placement generator is seeded from `seed`'s `data` sub-seed.
pub fn generate(kind: SyntheticKind, seed: u64, count: usize, size: usize) -> Result<Vec<Sample>> {
    let (mh, mw) = kind.shape_of(1);
    let (nh, nw) = kind.shape_of(0);
    if size < mh.max(mw).max(nh).max(nw) + 2 {
        return Err(Error::invalid(format!("images of side {size} cannot hold the {} shapes with a border", kind.name())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, "data"));
    Ok((0..count)
        .map(|id| {
            let label = id % 2;
            let (h, w) = kind.shape_of(label);
            let top = rng.gen_range(1..=size - 1 - h);
            let left = rng.gen_range(1..=size - 1 - w);
            Sample { id, label, image: draw_block(size, (h, w), (top, left)) }
        })
        .collect())
}

pub fn gen_squares(seed: u64) -> Vec<Sample> {
    generate(SyntheticKind::Squares, seed, SYNTHETIC_COUNT, IMAGE_SIZE).expect("224 fits every shape")
}

pub fn gen_rectangles(seed: u64) -> Vec<Sample> {
    generate(SyntheticKind::Rectangles, seed, SYNTHETIC_COUNT, IMAGE_SIZE).expect("224 fits every shape")
}

/// Disjoint, sorted id lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SplitPart {
    Train,
    Validation,
    Test,
}

impl SplitPart {
    pub fn name(self) -> &'static str {
        match self {
            SplitPart::Train => "train",
            SplitPart::Validation => "val",
            SplitPart::Test => "test",
        }
    }
}

impl core::str::FromStr for SplitPart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitPart::Train),
            "val" | "validation" => Ok(SplitPart::Validation),
            "test" => Ok(SplitPart::Test),
            _ => Err(Error::invalid(format!("unknown split `{s}` (expected train, val or test)"))),
        }
    }
}

impl Split {
    pub fn part(&self, p: SplitPart) -> &[usize] {
        match p {
            SplitPart::Train => &self.train,
            SplitPart::Validation => &self.validation,
            SplitPart::Test => &self.test,
        }
    }

    /// Which part holds `id`, if any.
    pub fn part_of(&self, id: usize) -> Option<SplitPart> {
        [SplitPart::Train, SplitPart::Validation, SplitPart::Test]
            .into_iter()
            .find(|&p| self.part(p).binary_search(&id).is_ok())
    }

    /// Samples of part `p`, in id order.
    pub fn select<'a>(&self, samples: &'a [Sample], p: SplitPart) -> Vec<&'a Sample> {
        let ids = self.part(p);
        samples.iter().filter(|s| ids.binary_search(&s.id).is_ok()).collect()
    }
}

/// Stratified 60/20/20 split: each class's ids are shuffled with `seed`'s `split` sub-seed and
/// cut at ⌊0.6·n⌋ and ⌊0.8·n⌋.
pub fn split_60_20_20(samples: &[Sample], seed: u64) -> Split {
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, "split"));
    let mut labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    labels.sort_unstable();
    labels.dedup();
    let mut split = Split { train: Vec::new(), validation: Vec::new(), test: Vec::new() };
    for label in labels {
        let mut ids: Vec<usize> = samples.iter().filter(|s| s.label == label).map(|s| s.id).collect();
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        let n = ids.len();
        let (a, b) = (n * 6 / 10, n * 8 / 10);
        split.train.extend_from_slice(&ids[..a]);
        split.validation.extend_from_slice(&ids[a..b]);
        split.test.extend_from_slice(&ids[b..]);
    }
    split.train.sort_unstable();
    split.validation.sort_unstable();
    split.test.sort_unstable();
    split
}

/// Bilinear resize with half-pixel sample centers and edge clamping.
pub fn resize_bilinear(image: &Tensor, height: usize, width: usize) -> Result<Tensor> {
    if height == 0 || width == 0 {
        return Err(Error::invalid("resize target must be non-empty"));
    }
    let s = image.shape();
    let taps = |out: usize, inp: usize| -> Vec<(usize, usize, f64)> {
        (0..out)
            .map(|o| {
                let src = ((o as f64 + 0.5) * inp as f64 / out as f64 - 0.5).clamp(0.0, (inp - 1) as f64);
                let i0 = libm::floor(src) as usize;
                let i1 = (i0 + 1).min(inp - 1);
                (i0, i1, src - i0 as f64)
            })
            .collect()
    };
    let rows = taps(height, s.height);
    let cols = taps(width, s.width);
    Ok(Tensor::from_fn(Shape::new(s.channels, height, width), |c, i, j| {
        let (r0, r1, a) = rows[i];
        let (c0, c1, b) = cols[j];
        let lerp = |v0: f64, v1: f64, t: f64| v0 + t * (v1 - v0);
        let top = lerp(image.get(c, r0, c0), image.get(c, r0, c1), b);
        let bottom = lerp(image.get(c, r1, c0), image.get(c, r1, c1), b);
        lerp(top, bottom, a)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphology::{make_se, open, SeShape};

    #[test]
    fn squares_have_expected_area() {
        let data = gen_squares(3);
        assert_eq!(data.len(), 1000);
        for s in &data {
            assert_eq!(s.image.sum(), if s.label == 0 { 25.0 } else { 81.0 });
        }
        assert_eq!(data.iter().filter(|s| s.label == 0).count(), 500);
    }

    #[test]
    fn rectangles_have_equal_area() {
        for s in gen_rectangles(4) {
            assert_eq!(s.image.sum(), 21.0);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(generate(SyntheticKind::Squares, 9, 20, 32).unwrap(), generate(SyntheticKind::Squares, 9, 20, 32).unwrap());
        assert_ne!(generate(SyntheticKind::Squares, 9, 20, 32).unwrap(), generate(SyntheticKind::Squares, 10, 20, 32).unwrap());
    }

    #[test]
    fn opening_with_square_7_separates_squares() {
        let se = make_se(SeShape::Square, 7).unwrap();
        for s in generate(SyntheticKind::Squares, 5, 40, 64).unwrap() {
            let o = open(&s.image, &se).sum();
            if s.label == 0 {
                assert_eq!(o, 0.0);
            } else {
                assert!(o > 0.0);
            }
        }
    }

    #[test]
    fn split_sizes_and_balance() {
        let data = gen_squares(1);
        let sp = split_60_20_20(&data, 1);
        assert_eq!((sp.train.len(), sp.validation.len(), sp.test.len()), (600, 200, 200));
        let mut all: Vec<usize> = sp.train.iter().chain(&sp.validation).chain(&sp.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
        for part in [&sp.train, &sp.validation, &sp.test] {
            let ones = part.iter().filter(|&&id| data[id].label == 1).count();
            assert!((ones as i64 - part.len() as i64 / 2).abs() <= 2);
        }
    }

    #[test]
    fn resize_examples() {
        let flat = Tensor::filled(Shape::new(2, 5, 7), 0.37);
        let r = resize_bilinear(&flat, 11, 3).unwrap();
        assert!(r.data().iter().all(|&v| v == 0.37));
        let x = Tensor::from_rows(&[&[0.0, 1.0], &[2.0, 3.0]]).unwrap();
        assert_eq!(resize_bilinear(&x, 2, 2).unwrap(), x);
        let up = resize_bilinear(&x, 4, 4).unwrap();
        assert_eq!(up.get(0, 0, 0), 0.0);
        assert_eq!(up.get(0, 0, 1), 0.25);
        assert_eq!(up.get(0, 3, 3), 3.0);
    }
}
