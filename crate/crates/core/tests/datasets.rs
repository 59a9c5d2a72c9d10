use morphnet_core::data::{draw_block, gen_rectangles, gen_squares, resize_bilinear, split_60_20_20, Sample, SplitPart, SyntheticKind};
use morphnet_core::morphology::{make_se, open, SeShape, StructuringElement};
use morphnet_core::{Shape, Tensor};
use proptest::prelude::*;

/// Bounding box of the foreground and its pixel count.
fn foreground(image: &Tensor) -> ((usize, usize, usize, usize), usize) {
    let s = image.shape();
    let (mut top, mut left, mut bottom, mut right, mut n) = (usize::MAX, usize::MAX, 0, 0, 0);
    for i in 0..s.height {
        for j in 0..s.width {
            let v = image.get(0, i, j);
            assert!(v == 0.0 || v == 1.0);
            if v == 1.0 {
                top = top.min(i);
                left = left.min(j);
                bottom = bottom.max(i);
                right = right.max(j);
                n += 1;
            }
        }
    }
    ((top, left, bottom, right), n)
}

fn check_blocks(data: &[Sample], kind: SyntheticKind) {
    assert_eq!(data.len(), 1000);
    for s in data {
        assert_eq!(s.label, s.id % 2);
        assert_eq!(s.image.shape(), Shape::new(1, 224, 224));
        let ((t, l, b, r), n) = foreground(&s.image);
        let (h, w) = kind.shape_of(s.label);
        // A full rectangle of the bounding box's size is a single connected component.
        assert_eq!((b - t + 1, r - l + 1, n), (h, w, h * w), "sample {}", s.id);
        assert!(t >= 1 && l >= 1 && b <= 222 && r <= 222, "sample {} touches the border", s.id);
    }
}

#[test]
fn squares_are_single_interior_blocks() {
    let data = gen_squares(7);
    check_blocks(&data, SyntheticKind::Squares);
    assert_eq!(data, gen_squares(7));
}

#[test]
fn rectangles_are_single_interior_blocks() {
    let data = gen_rectangles(7);
    check_blocks(&data, SyntheticKind::Rectangles);
    assert_eq!(data.iter().filter(|s| s.label == 1).count(), 500);
}

#[test]
fn square_7_opening_separates_the_squares() {
    let se = make_se(SeShape::Square, 7).unwrap();
    for s in gen_squares(11).iter().take(200) {
        let o = open(&s.image, &se);
        if s.label == 0 {
            assert_eq!(o.max_value(), 0.0);
        } else {
            assert_eq!(o, s.image);
        }
    }
}

#[test]
fn tall_line_opening_separates_the_rectangles() {
    // 5 tall, 3 wide: fits the 3-wide, 7-tall class and nothing 3 tall.
    let se = StructuringElement::rectangle(5, 3).unwrap();
    for s in gen_rectangles(11).iter().take(200) {
        let o = open(&s.image, &se);
        if s.label == 0 {
            assert_eq!(o.max_value(), 0.0);
        } else {
            assert_eq!(o, s.image);
        }
    }
}

#[test]
fn split_is_deterministic_disjoint_and_stratified() {
    let data = gen_rectangles(3);
    let sp = split_60_20_20(&data, 3);
    assert_eq!(sp, split_60_20_20(&data, 3));
    assert_ne!(sp, split_60_20_20(&data, 4));
    for p in [SplitPart::Train, SplitPart::Validation, SplitPart::Test] {
        let ids = sp.part(p);
        assert!(ids.windows(2).all(|w| w[0] < w[1]));
        let ones = ids.iter().filter(|&&i| data[i].label == 1).count();
        assert!((ones as isize - ids.len() as isize / 2).abs() <= 2);
        for &i in ids {
            assert_eq!(sp.part_of(i), Some(p));
        }
    }
    assert_eq!(sp.select(&data, SplitPart::Test).len(), 200);
}

proptest! {
    #[test]
    fn resize_keeps_constants(c in 1usize..4, h in 1usize..20, w in 1usize..20, oh in 1usize..40, ow in 1usize..40, v in 0.0f64..1.0) {
        let r = resize_bilinear(&Tensor::filled(Shape::new(c, h, w), v), oh, ow).unwrap();
        prop_assert_eq!(r.shape(), Shape::new(c, oh, ow));
        prop_assert!(r.data().iter().all(|&x| x == v));
    }

    #[test]
    fn resize_to_the_same_size_is_identity(h in 1usize..12, w in 1usize..12, seed in any::<u64>()) {
        let x = Tensor::from_fn(Shape::new(1, h, w), |_, i, j| ((seed as usize ^ (i * 31 + j * 7)) % 97) as f64);
        prop_assert_eq!(resize_bilinear(&x, h, w).unwrap(), x);
    }
}

#[test]
fn draw_block_places_the_block() {
    let b = draw_block(6, (2, 3), (1, 2));
    assert_eq!(b.sum(), 6.0);
    assert_eq!(b.get(0, 1, 2), 1.0);
    assert_eq!(b.get(0, 3, 2), 0.0);
}
