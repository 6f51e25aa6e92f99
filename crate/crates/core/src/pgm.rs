//! Binary PGM (P5) with 8-bit samples and maxval 255.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::transform::ImagePlane;

/// Raw 8-bit grayscale raster as stored in a PGM file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gray8 {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Gray8 {
    pub fn to_plane(&self) -> Result<ImagePlane> {
        ImagePlane::from_u8(self.width, self.height, &self.pixels)
    }
}

struct HeaderReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.data.len() {
            match self.data[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                b'#' => {
                    while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.data.len() && self.data[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(format!("PGM header: missing {what}")));
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(format!("PGM header: bad {what}")))
    }
}

pub fn decode(data: &[u8]) -> Result<Gray8> {
    if data.len() < 2 || &data[..2] != b"P5" {
        return Err(Error::format("not a binary PGM (missing P5 magic)"));
    }
    let mut header = HeaderReader { data, pos: 2 };
    let width = header.number("width")?;
    let height = header.number("height")?;
    let maxval = header.number("maxval")?;
    if maxval != 255 {
        return Err(Error::format(format!(
            "unsupported PGM maxval {maxval}, expected 255"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    match data.get(header.pos) {
        Some(b) if b.is_ascii_whitespace() => header.pos += 1,
        _ => return Err(Error::format("PGM header not terminated by whitespace")),
    }
    let len = width
        .checked_mul(height)
        .ok_or_else(|| Error::format("PGM dimensions overflow"))?;
    let raster = &data[header.pos..];
    if raster.len() < len {
        return Err(Error::format(format!(
            "PGM raster truncated: {} of {len} bytes",
            raster.len()
        )));
    }
    Ok(Gray8 {
        width,
        height,
        pixels: raster[..len].to_vec(),
    })
}

pub fn encode(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(
        pixels.len(),
        width * height,
        "pixel count does not match dimensions"
    );
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

pub fn read(path: impl AsRef<Path>) -> Result<Gray8> {
    decode(&fs::read(path)?)
}

pub fn write(path: impl AsRef<Path>, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    fs::write(path, encode(width, height, pixels))?;
    Ok(())
}

pub fn read_plane(path: impl AsRef<Path>) -> Result<ImagePlane> {
    read(path)?.to_plane()
}

pub fn write_plane(path: impl AsRef<Path>, image: &ImagePlane) -> Result<()> {
    write(path, image.width(), image.height(), &image.to_u8())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_comment() {
        let pixels: Vec<u8> = (0..=255).collect();
        let mut bytes = b"P5\n# made by hand\n16 16\n255\n".to_vec();
        bytes.extend_from_slice(&pixels);
        let img = decode(&bytes).unwrap();
        assert_eq!((img.width, img.height), (16, 16));
        assert_eq!(img.pixels, pixels);
        assert_eq!(decode(&encode(16, 16, &pixels)).unwrap(), img);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(decode(b"P2\n1 1\n255\n0").is_err());
        assert!(decode(b"P5\n2 2\n255\n\x00\x01").is_err());
        assert!(decode(b"P5\n2 2\n65535\n").is_err());
        assert!(decode(b"P5\n2\n").is_err());
    }

    #[test]
    fn samples_normalized_by_255() {
        let img = decode(&encode(8, 8, &[255; 64]))
            .unwrap()
            .to_plane()
            .unwrap();
        assert!(img.samples().iter().all(|&s| s == 1.0));
    }
}
