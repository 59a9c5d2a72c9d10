//! Binary netpbm images: `P5` (graymap) and `P6` (pixmap).
//!
//! Decoding accepts `#` comments between header tokens and any maxval in `1..=65535`; samples
//! wider than one byte are big-endian. Decoded intensities are `sample / maxval`.

use morphnet_core::{Shape, Tensor};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PnmError {
    #[error("not a binary PGM/PPM file (magic {0:?})")]
    BadMagic(String),
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("maxval {0} outside 1..=65535")]
    BadMaxval(u32),
    #[error("truncated raster: {expected} bytes expected, {got} present")]
    Truncated { expected: usize, got: usize },
    #[error("{0} trailing bytes after the raster")]
    Trailing(usize),
    #[error("cannot encode {0}")]
    Unencodable(String),
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, PnmError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PnmError::BadHeader(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| PnmError::BadHeader(format!("{what} is too large")))
    }
}

/// Decodes a `P5` or `P6` file into a 1- or 3-channel tensor with values in `[0, 1]`.
pub fn decode(bytes: &[u8]) -> Result<Tensor, PnmError> {
    let magic = bytes.get(..2).unwrap_or(bytes);
    let channels = match magic {
        b"P5" => 1,
        b"P6" => 3,
        _ => return Err(PnmError::BadMagic(String::from_utf8_lossy(magic).into_owned())),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    if !cur.bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(PnmError::BadHeader("magic must be followed by whitespace".into()));
    }
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(PnmError::BadHeader(format!("empty image {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(PnmError::BadMaxval(maxval));
    }
    if !cur.bytes.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(PnmError::BadHeader("maxval must be followed by one whitespace byte".into()));
    }
    let raster = &bytes[cur.pos + 1..];
    let depth = if maxval > 255 { 2 } else { 1 };
    let expected = width * height * channels * depth;
    if raster.len() < expected {
        return Err(PnmError::Truncated { expected, got: raster.len() });
    }
    if raster.len() > expected {
        return Err(PnmError::Trailing(raster.len() - expected));
    }
    let scale = f64::from(maxval);
    let sample = |k: usize| -> f64 {
        let v = if depth == 2 { u16::from_be_bytes([raster[2 * k], raster[2 * k + 1]]) } else { u16::from(raster[k]) };
        f64::from(v) / scale
    };
    // Raster is pixel-interleaved; tensors are channel-major.
    Ok(Tensor::from_fn(Shape::new(channels, height, width), |c, i, j| sample((i * width + j) * channels + c)))
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Encodes a 1-channel (`P5`) or 3-channel (`P6`) tensor with maxval 255; values are clamped to
/// `[0, 1]` and rounded.
pub fn encode(image: &Tensor) -> Result<Vec<u8>, PnmError> {
    let s = image.shape();
    let magic = match s.channels {
        1 => "P5",
        3 => "P6",
        c => return Err(PnmError::Unencodable(format!("a {c}-channel image"))),
    };
    let mut out = format!("{magic}\n{} {}\n255\n", s.width, s.height).into_bytes();
    out.reserve(s.len());
    for i in 0..s.height {
        for j in 0..s.width {
            for c in 0..s.channels {
                out.push(quantize(image.get(c, i, j)));
            }
        }
    }
    Ok(out)
}
