//! Minimal RGB raster with binary PPM (P6) encoding.

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB triples, top row first.
    pub pixels: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, fill: [u8; 3]) -> Self {
        Self {
            width,
            height,
            pixels: fill.repeat(width * height),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> [u8; 3] {
        let i = 3 * (row * self.width + col);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, row: usize, col: usize, rgb: [u8; 3]) {
        let i = 3 * (row * self.width + col);
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Set a pixel given signed coordinates; out-of-image writes are dropped.
    pub fn set_clipped(&mut self, row: i64, col: i64, rgb: [u8; 3]) {
        if row >= 0 && col >= 0 && (row as usize) < self.height && (col as usize) < self.width {
            self.set(row as usize, col as usize, rgb);
        }
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    /// Parse the exact header layout written by [`RgbImage::to_ppm`]
    /// (single whitespace separators, no comments, maxval 255).
    pub fn from_ppm(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::InvalidArgument(format!("PPM: {m}"));
        let mut fields = Vec::with_capacity(4);
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ASCII header"))?);
        }
        if fields[0] != "P6" || fields[3] != "255" {
            return Err(bad("only binary P6 with maxval 255 is supported"));
        }
        let width: usize = fields[1].parse().map_err(|_| bad("bad width"))?;
        let height: usize = fields[2].parse().map_err(|_| bad("bad height"))?;
        let body = &bytes[pos + 1..];
        if body.len() != width * height * 3 {
            return Err(bad("pixel data length does not match the header"));
        }
        Ok(Self {
            width,
            height,
            pixels: body.to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_header_and_parse_back() {
        let mut img = RgbImage::new(2, 1, [255, 255, 255]);
        img.set(0, 1, [1, 2, 3]);
        let bytes = img.to_ppm();
        assert!(bytes.starts_with(b"P6\n2 1\n255\n"));
        assert_eq!(RgbImage::from_ppm(&bytes).unwrap(), img);
    }

    #[test]
    fn rejects_other_formats() {
        assert!(RgbImage::from_ppm(b"P3\n1 1\n255\n0 0 0").is_err());
        assert!(RgbImage::from_ppm(b"P6\n2 2\n255\nabc").is_err());
    }
}
