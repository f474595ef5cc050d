//! Binary PGM (P5) label masks and PPM (P6) color maps.

use std::path::Path;

use super::raster::LabelMask;
use crate::{Error, Result};

/// A decoded 8-bit grayscale raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<u8>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos || self.pos - start > 9 {
            return Err(Error::Header(format!("bad PNM {what}")));
        }
        // ascii digits only, at most 9 of them
        Ok(std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .unwrap())
    }
}

/// Parses a P5 header and returns `(width, height, maxval, payload offset)`.
fn parse_header(bytes: &[u8], magic: &[u8; 2]) -> Result<(usize, usize, usize, usize)> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(Error::Header(format!(
            "missing {} magic",
            String::from_utf8_lossy(magic)
        )));
    }
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => {
            return Err(Error::Header(
                "PNM header not terminated by whitespace".into(),
            ))
        }
    }
    if width == 0 || height == 0 {
        return Err(Error::Header("zero-sized PNM".into()));
    }
    Ok((width, height, maxval, cur.pos))
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let (width, height, maxval, offset) = parse_header(bytes, b"P5")?;
    if maxval != 255 {
        return Err(Error::Header(format!(
            "PGM maxval must be 255, got {maxval}"
        )));
    }
    let expected = width * height;
    let payload = &bytes[offset..];
    if payload.len() != expected {
        return Err(Error::PayloadLength {
            expected,
            actual: payload.len(),
        });
    }
    Ok(GrayImage {
        height,
        width,
        pixels: payload.to_vec(),
    })
}

pub fn encode_pgm(height: usize, width: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

pub fn decode_mask(bytes: &[u8]) -> Result<LabelMask> {
    let img = decode_pgm(bytes)?;
    LabelMask::new(img.height, img.width, img.pixels)
}

pub fn encode_mask(mask: &LabelMask) -> Vec<u8> {
    encode_pgm(mask.height(), mask.width(), mask.labels())
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<LabelMask> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_mask(&bytes)
}

pub fn save_mask(mask: &LabelMask, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_mask(mask))
}

pub fn save_pgm(height: usize, width: usize, pixels: &[u8], path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_pgm(height, width, pixels))
}

/// Encodes an interleaved RGB8 buffer as binary PPM.
pub fn encode_ppm(height: usize, width: usize, rgb: &[u8]) -> Vec<u8> {
    debug_assert_eq!(rgb.len(), height * width * 3);
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    out
}

/// Decodes a P6 image into `(height, width, interleaved rgb)`.
pub fn decode_ppm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let (width, height, maxval, offset) = parse_header(bytes, b"P6")?;
    if maxval != 255 {
        return Err(Error::Header(format!(
            "PPM maxval must be 255, got {maxval}"
        )));
    }
    let expected = width * height * 3;
    let payload = &bytes[offset..];
    if payload.len() != expected {
        return Err(Error::PayloadLength {
            expected,
            actual: payload.len(),
        });
    }
    Ok((height, width, payload.to_vec()))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_round_trip() {
        let mask = LabelMask::new(2, 3, vec![0, 1, 255, 1, 0, 0]).unwrap();
        let bytes = encode_mask(&mask);
        assert_eq!(&bytes[..11], b"P5\n3 2\n255\n");
        assert_eq!(decode_mask(&bytes).unwrap(), mask);
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P5 # a comment\n2 # w\n1\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 0]);
        let m = decode_mask(&bytes).unwrap();
        assert_eq!(m.labels(), &[1, 0]);
    }

    #[test]
    fn invalid_masks() {
        assert!(decode_mask(b"P2\n1 1\n255\n\x00").is_err());
        assert!(decode_mask(b"P5\n1 1\n15\n\x00").is_err());
        assert!(decode_mask(b"P5\n2 1\n255\n\x00").is_err());
        assert!(decode_mask(b"P5\n1 1\n255\n\x07").is_err());
        assert!(decode_mask(b"P5\n1 1\n255").is_err());
        assert!(decode_mask(b"P5\n99999999999 1\n255\n").is_err());
    }

    #[test]
    fn ppm_round_trip() {
        let rgb = vec![1, 2, 3, 4, 5, 6];
        let bytes = encode_ppm(1, 2, &rgb);
        assert_eq!(decode_ppm(&bytes).unwrap(), (1, 2, rgb));
    }
}
