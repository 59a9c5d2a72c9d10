use morphnet::pnm::{decode, encode, PnmError};
use morphnet_core::{Shape, Tensor};
use proptest::prelude::*;

#[test]
fn decodes_2x2_graymap() {
    let mut bytes = b"P5\n2 2\n255\n".to_vec();
    bytes.extend_from_slice(&[0, 255, 0, 255]);
    let t = decode(&bytes).unwrap();
    assert_eq!(t.shape(), Shape::new(1, 2, 2));
    assert_eq!(t.data(), &[0.0, 1.0, 0.0, 1.0]);
}

/// Straightforward reading of the P6 layout: header tokens, then interleaved RGB triples.
fn reference_p6(bytes: &[u8]) -> (usize, usize, Vec<[f64; 3]>) {
    let text_end = bytes.iter().enumerate().filter(|(_, &b)| b == b'\n').nth(2).unwrap().0 + 1;
    let header = std::str::from_utf8(&bytes[..text_end]).unwrap();
    let tokens: Vec<&str> = header.split_whitespace().collect();
    assert_eq!(tokens[0], "P6");
    let (w, h, max): (usize, usize, f64) = (tokens[1].parse().unwrap(), tokens[2].parse().unwrap(), tokens[3].parse().unwrap());
    let px = bytes[text_end..].chunks(3).map(|c| [c[0] as f64 / max, c[1] as f64 / max, c[2] as f64 / max]).collect();
    (w, h, px)
}

#[test]
fn pixmap_matches_byte_level_reference() {
    let (w, h) = (5usize, 3usize);
    let mut bytes = format!("P6\n{w} {h}\n255\n").into_bytes();
    for k in 0..w * h * 3 {
        bytes.push((k * 37 % 256) as u8);
    }
    let t = decode(&bytes).unwrap();
    assert_eq!(t.shape(), Shape::new(3, h, w));
    let (rw, rh, px) = reference_p6(&bytes);
    assert_eq!((rw, rh), (w, h));
    for i in 0..h {
        for j in 0..w {
            for (c, &v) in px[i * w + j].iter().enumerate() {
                assert_eq!(t.get(c, i, j), v, "pixel ({i},{j}) channel {c}");
            }
        }
    }
}

#[test]
fn sixteen_bit_samples_are_big_endian() {
    let mut bytes = b"P5 2 1 1000 ".to_vec();
    bytes.extend_from_slice(&[0x01, 0xF4, 0x03, 0xE8]);
    let t = decode(&bytes).unwrap();
    assert_eq!(t.data(), &[500.0 / 1000.0, 1.0]);
}

#[test]
fn comments_between_tokens() {
    let mut bytes = b"P5\n# made by hand\n1 # width\n1\n# max\n15\n".to_vec();
    bytes.push(3);
    assert_eq!(decode(&bytes).unwrap().data(), &[3.0 / 15.0]);
}

#[test]
fn rejects_malformed_files() {
    assert!(matches!(decode(b"P2\n1 1\n255\n0"), Err(PnmError::BadMagic(_))));
    assert!(matches!(decode(b"P5\n1\n"), Err(PnmError::BadHeader(_))));
    assert!(matches!(decode(b"P5\n0 1\n255\n"), Err(PnmError::BadHeader(_))));
    assert!(matches!(decode(b"P5\n1 1\n0\n\x00"), Err(PnmError::BadMaxval(0))));
    assert!(matches!(decode(b"P5\n1 1\n70000\n\x00\x00"), Err(PnmError::BadMaxval(70000))));
    assert!(matches!(decode(b"P5\n2 2\n255\n\x00\x01"), Err(PnmError::Truncated { expected: 4, got: 2 })));
    assert!(matches!(decode(b"P5\n1 1\n255\n\x00\x01"), Err(PnmError::Trailing(1))));
}

#[test]
fn encode_rejects_two_channels() {
    assert!(matches!(encode(&Tensor::zeros(Shape::new(2, 1, 1))), Err(PnmError::Unencodable(_))));
}

#[test]
fn encode_clamps_and_rounds() {
    let t = Tensor::new(Shape::new(1, 1, 4), vec![-0.5, 0.5, 1.0 / 255.0 * 10.4, 2.0]).unwrap();
    let bytes = encode(&t).unwrap();
    assert_eq!(&bytes[bytes.len() - 4..], &[0, 128, 10, 255]);
}

proptest! {
    #[test]
    fn round_trip_on_the_8_bit_grid(c in prop::sample::select(vec![1usize, 3]), h in 1usize..6, w in 1usize..6, seed in any::<u64>()) {
        let t = Tensor::from_fn(Shape::new(c, h, w), |k, i, j| ((seed >> ((k + i + j) % 56)) % 256) as f64 / 255.0);
        let back = decode(&encode(&t).unwrap()).unwrap();
        prop_assert_eq!(back, t);
    }
}
