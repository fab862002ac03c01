//! Plain (P2) and raw (P5) greymap images, mapped to `[0, 1]`.

use std::path::Path;

use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("PGM parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmFormat {
    /// P2
    Ascii,
    /// P5
    Binary,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn fail<T>(&self, message: impl Into<String>) -> Result<T, PgmError> {
        Err(PgmError::Parse {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token_start(&mut self) -> usize {
        self.skip_space_and_comments();
        self.pos
    }

    fn number(&mut self, what: &str) -> Result<usize, PgmError> {
        let start = self.token_start();
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            self.pos = start;
            return self.fail(format!("expected {what}"));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        text.parse().or_else(|_| {
            self.pos = start;
            self.fail(format!("{what} out of range"))
        })
    }
}

/// Decodes a P2 or P5 image; pixel values are divided by maxval.
pub fn decode_pgm(bytes: &[u8]) -> Result<Array2<f64>, PgmError> {
    let mut c = Cursor { bytes, pos: 0 };
    let format = match bytes.get(0..2) {
        Some(b"P2") => PgmFormat::Ascii,
        Some(b"P5") => PgmFormat::Binary,
        _ => return c.fail("expected magic number P2 or P5"),
    };
    c.pos = 2;
    let width = c.number("width")?;
    let height = c.number("height")?;
    let maxval_at = c.token_start();
    let maxval = c.number("maxval")?;
    if width == 0 || height == 0 {
        return c.fail("image dimensions must be positive");
    }
    if maxval == 0 || maxval > 65535 {
        c.pos = maxval_at;
        return c.fail(format!("maxval must lie in 1..=65535, got {maxval}"));
    }
    let count = width.checked_mul(height).filter(|n| *n <= 1 << 28);
    let Some(count) = count else {
        return c.fail("image too large");
    };
    let mut pixels = Vec::with_capacity(count);
    match format {
        PgmFormat::Ascii => {
            for _ in 0..count {
                let start = c.token_start();
                let v = c.number("pixel value")?;
                if v > maxval {
                    c.pos = start;
                    return c.fail(format!("pixel value {v} exceeds maxval {maxval}"));
                }
                pixels.push(v as f64 / maxval as f64);
            }
        }
        PgmFormat::Binary => {
            if !bytes.get(c.pos).is_some_and(|b| b.is_ascii_whitespace()) {
                return c.fail("expected a single whitespace byte before the raster");
            }
            c.pos += 1;
            let width_bytes = if maxval < 256 { 1 } else { 2 };
            let need = count * width_bytes;
            if bytes.len() - c.pos < need {
                let offset = bytes.len();
                return Err(PgmError::Parse {
                    offset,
                    message: format!("raster truncated: need {need} bytes, found {}", bytes.len() - c.pos),
                });
            }
            for i in 0..count {
                let at = c.pos + i * width_bytes;
                let v = if width_bytes == 1 {
                    bytes[at] as usize
                } else {
                    ((bytes[at] as usize) << 8) | bytes[at + 1] as usize
                };
                if v > maxval {
                    c.pos = at;
                    return c.fail(format!("pixel value {v} exceeds maxval {maxval}"));
                }
                pixels.push(v as f64 / maxval as f64);
            }
        }
    }
    Ok(Array2::from_shape_vec((height, width), pixels).expect("length checked"))
}

/// 8-bit encoding; values are clamped to `[0, 1]` and rounded to `k / 255`.
pub fn encode_pgm(image: &Array2<f64>, format: PgmFormat) -> Vec<u8> {
    let (h, w) = image.dim();
    let quant = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    match format {
        PgmFormat::Ascii => {
            let mut s = format!("P2\n{w} {h}\n255\n");
            for row in image.rows() {
                let line: Vec<String> = row.iter().map(|v| quant(*v).to_string()).collect();
                s.push_str(&line.join(" "));
                s.push('\n');
            }
            s.into_bytes()
        }
        PgmFormat::Binary => {
            let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
            out.extend(image.iter().map(|v| quant(*v)));
            out
        }
    }
}

pub fn read_pgm(path: &Path) -> Result<Array2<f64>, PgmError> {
    decode_pgm(&std::fs::read(path)?)
}

pub fn write_pgm(path: &Path, image: &Array2<f64>, format: PgmFormat) -> Result<(), PgmError> {
    std::fs::write(path, encode_pgm(image, format))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn offset_of(r: Result<Array2<f64>, PgmError>) -> usize {
        match r {
            Err(PgmError::Parse { offset, .. }) => offset,
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn single_white_pixel() {
        let img = decode_pgm(b"P5 1 1 255\n\xff").unwrap();
        assert_eq!(img[[0, 0]], 1.0);
        let img = decode_pgm(b"P2\n# c\n1 1\n255\n255\n").unwrap();
        assert_eq!(img[[0, 0]], 1.0);
    }

    #[test]
    fn round_trip_random_8bit() {
        let mut state = 12345u64;
        let img = Array2::from_shape_fn((64, 64), |_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) % 256) as f64 / 255.0
        });
        for fmt in [PgmFormat::Ascii, PgmFormat::Binary] {
            let back = decode_pgm(&encode_pgm(&img, fmt)).unwrap();
            assert_eq!(back, img);
        }
    }

    #[test]
    fn ascii_and_binary_agree() {
        let img = Array2::from_shape_fn((5, 7), |(i, j)| ((i * 7 + j) * 7 % 256) as f64 / 255.0);
        let a = decode_pgm(&encode_pgm(&img, PgmFormat::Ascii)).unwrap();
        let b = decode_pgm(&encode_pgm(&img, PgmFormat::Binary)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sixteen_bit_raster() {
        let img = decode_pgm(b"P5 2 1 65535\n\xff\xff\x80\x00").unwrap();
        assert_eq!(img[[0, 0]], 1.0);
        assert_eq!(img[[0, 1]], 32768.0 / 65535.0);
    }

    #[test]
    fn malformed_headers_report_offsets() {
        assert_eq!(offset_of(decode_pgm(b"P6 1 1 255\n\x00")), 0);
        assert_eq!(offset_of(decode_pgm(b"P2 1 x 255\n0")), 5);
        assert_eq!(offset_of(decode_pgm(b"P2 1 1 70000\n0")), 7);
        assert_eq!(offset_of(decode_pgm(b"P2 1 1 9\n12")), 9);
        assert_eq!(offset_of(decode_pgm(b"P5 2 2 255\n\x00")), 12);
    }
}
