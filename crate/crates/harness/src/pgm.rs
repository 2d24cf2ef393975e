//! Binary PGM (`P5`). Images are written with maxval 65535 and big-endian
//! samples; reading also accepts 8-bit files.

use std::io::Write;
use std::path::Path;

use tesla_servo_core::metrics::GrayImage;

use crate::error::{HarnessError, Result};

pub fn encode(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", img.width(), img.height()).into_bytes();
    out.reserve(img.pixels().len() * 2);
    for p in img.pixels() {
        out.extend_from_slice(&p.to_be_bytes());
    }
    out
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> std::result::Result<usize, String> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("expected a number at byte {start}"))
    }
}

pub fn decode(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    if !bytes.starts_with(b"P5") {
        return Err("not a binary PGM (missing P5 magic)".into());
    }
    let mut h = Header { bytes, pos: 2 };
    let width = h.number()?;
    let height = h.number()?;
    let maxval = h.number()?;
    if !(1..=65535).contains(&maxval) {
        return Err(format!("maxval {maxval} out of range"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if !bytes.get(h.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err("missing whitespace after maxval".into());
    }
    let data = &bytes[h.pos + 1..];
    let n = width.checked_mul(height).ok_or("image too large")?;
    let pixels: Vec<u16> = if maxval < 256 {
        data.get(..n)
            .ok_or("truncated raster")?
            .iter()
            .map(|&b| b as u16)
            .collect()
    } else {
        data.get(..2 * n)
            .ok_or("truncated raster")?
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    GrayImage::new(width, height, pixels).map_err(|e| e.to_string())
}

pub fn read(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    decode(&bytes).map_err(|e| HarnessError::parse(path, e))
}

pub fn write(path: &Path, img: &GrayImage) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    f.write_all(&encode(img)).map_err(|e| HarnessError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let img = GrayImage::new(2, 1, vec![0x0102, 0xffff]).unwrap();
        assert_eq!(encode(&img), b"P5\n2 1\n65535\n\x01\x02\xff\xff");
    }

    #[test]
    fn reads_comments_and_8_bit() {
        let bytes = b"P5 # comment\n3 1\n255\n\x00\x80\xff";
        let img = decode(bytes).unwrap();
        assert_eq!(img.pixels(), &[0, 128, 255]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(decode(b"P2\n1 1\n255\n0").is_err());
        assert!(decode(b"P5\n2 2\n65535\n\x00\x00").is_err());
        assert!(decode(b"P5\n1 1\n70000\n\x00\x00").is_err());
    }
}
