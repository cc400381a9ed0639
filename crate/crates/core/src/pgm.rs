//! Binary PGM (P5) grayscale images.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Row-major samples, each in `0..=maxval`.
    pub pixels: Vec<u16>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, maxval: u16, pixels: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::structural("image dimensions must be positive"));
        }
        if maxval == 0 {
            return Err(Error::structural("maxval must be positive"));
        }
        if pixels.len() != width * height {
            return Err(Error::structural(format!(
                "{}×{} image needs {} samples, got {}",
                width,
                height,
                width * height,
                pixels.len()
            )));
        }
        if let Some(&p) = pixels.iter().find(|&&p| p > maxval) {
            return Err(Error::structural(format!("sample {p} exceeds maxval {maxval}")));
        }
        Ok(Self { width, height, maxval, pixels })
    }

    /// 8-bit image from intensities in `[0, 1]`; values outside are clamped.
    pub fn from_unit(width: usize, height: usize, values: &[f64]) -> Result<Self> {
        let pixels = values
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u16)
            .collect();
        Self::new(width, height, 255, pixels)
    }

    /// Samples divided by `maxval`.
    pub fn to_unit(&self) -> Vec<f64> {
        let m = f64::from(self.maxval);
        self.pixels.iter().map(|&p| f64::from(p) / m).collect()
    }
}

/// Decodes a P5 file. Header comments (`#` to end of line) are skipped;
/// samples are one byte when `maxval < 256` and two big-endian bytes otherwise.
pub fn decode(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::parse(0, "not a binary PGM file (magic `P5` expected)"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::parse(pos, "expected a decimal header field"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| Error::parse(start, "header field out of range"))?;
    }
    let [width, height, maxval] = fields;
    if !(1..=65535).contains(&maxval) {
        return Err(Error::parse(pos, format!("maxval {maxval} outside 1..=65535")));
    }
    match bytes.get(pos) {
        Some(c) if c.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::parse(pos, "expected whitespace after maxval")),
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| Error::parse(pos, "image dimensions overflow"))?;
    let wide = maxval > 255;
    let need = count * if wide { 2 } else { 1 };
    let body = &bytes[pos..];
    if body.len() < need {
        return Err(Error::parse(bytes.len(), format!("pixel data truncated: {} of {need} bytes", body.len())));
    }
    let pixels: Vec<u16> = if wide {
        body[..need].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    } else {
        body[..need].iter().map(|&b| u16::from(b)).collect()
    };
    if let Some(i) = pixels.iter().position(|&p| usize::from(p) > maxval) {
        let offset = pos + i * if wide { 2 } else { 1 };
        return Err(Error::parse(offset, "sample exceeds maxval"));
    }
    GrayImage::new(width, height, maxval as u16, pixels).map_err(|e| Error::parse(0, e.to_string()))
}

pub fn encode(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", image.width, image.height, image.maxval).into_bytes();
    if image.maxval > 255 {
        for &p in &image.pixels {
            out.extend_from_slice(&p.to_be_bytes());
        }
    } else {
        out.extend(image.pixels.iter().map(|&p| p as u8));
    }
    out
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        Error::Parse { offset, msg } => Error::Parse {
            offset,
            msg: format!("{}: {msg}", path.display()),
        },
        other => other,
    })
}

pub fn write_pgm(path: impl AsRef<Path>, image: &GrayImage) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(image)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_8_and_16_bit() {
        let img = GrayImage::new(3, 2, 255, vec![0, 1, 2, 128, 254, 255]).unwrap();
        assert_eq!(decode(&encode(&img)).unwrap(), img);
        let wide = GrayImage::new(2, 2, 1000, vec![0, 999, 1000, 256]).unwrap();
        assert_eq!(decode(&encode(&wide)).unwrap(), wide);
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P5\n# made by hand\n2 1 # trailing\n255\n".to_vec();
        bytes.extend([7, 9]);
        let img = decode(&bytes).unwrap();
        assert_eq!((img.width, img.height, img.pixels.clone()), (2, 1, vec![7, 9]));
    }

    #[test]
    fn errors_carry_offsets() {
        match decode(b"P2\n1 1\n255\n0") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("{other:?}"),
        }
        match decode(b"P5\n2 2\n255\n\x01\x02") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 13),
            other => panic!("{other:?}"),
        }
        assert!(decode(b"P5\n2 x\n255\n").is_err());
        assert!(decode(b"P5\n1 1\n0\n\x00").is_err());
        assert!(decode(b"P5\n1 1\n10\n\x0b").is_err());
    }

    #[test]
    fn unit_conversion_quantizes() {
        let img = GrayImage::from_unit(2, 1, &[0.5, 1.2]).unwrap();
        assert_eq!(img.pixels, vec![128, 255]);
        let back = img.to_unit();
        assert!((back[0] - 0.5).abs() <= 0.5 / 255.0);
    }
}
