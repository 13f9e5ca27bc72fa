//! Binary (P5) PGM frames with maxval 255.

use std::path::Path;

use crate::dataset::{dequantize, quantize};
use crate::error::{HpnetError, Result};

/// A decoded grayscale frame with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<f64>,
}

pub fn encode(height: usize, width: usize, pixels: &[f64]) -> Result<Vec<u8>> {
    if pixels.len() != height * width || pixels.is_empty() {
        return Err(HpnetError::contract(format!(
            "{} pixels do not form a {height}x{width} frame",
            pixels.len()
        )));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(pixels.iter().map(|&p| quantize(p)));
    Ok(out)
}

/// Reads the next whitespace-delimited header token, skipping `#` comments.
fn token(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    loop {
        while bytes.get(*pos).is_some_and(u8::is_ascii_whitespace) {
            *pos += 1;
        }
        if bytes.get(*pos) == Some(&b'#') {
            while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| HpnetError::format(start as u64, "expected a decimal header field"))
}

pub fn decode(bytes: &[u8]) -> Result<Frame> {
    if !bytes.starts_with(b"P5") {
        return Err(HpnetError::format(0, "bad magic, expected \"P5\""));
    }
    let mut pos = 2;
    let width = token(bytes, &mut pos)?;
    let height = token(bytes, &mut pos)?;
    let at = pos;
    let maxval = token(bytes, &mut pos)?;
    if maxval != 255 {
        return Err(HpnetError::format(
            at as u64,
            format!("maxval {maxval} unsupported, expected 255"),
        ));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(HpnetError::format(pos as u64, "missing whitespace after header"));
    }
    pos += 1;
    let n = height * width;
    let raster = bytes
        .get(pos..pos + n)
        .ok_or_else(|| HpnetError::format(pos as u64, format!("truncated raster: expected {n} bytes")))?;
    if bytes.len() != pos + n {
        return Err(HpnetError::format((pos + n) as u64, "trailing bytes after raster"));
    }
    Ok(Frame {
        height,
        width,
        pixels: raster.iter().map(|&b| dequantize(b)).collect(),
    })
}

pub fn write(path: impl AsRef<Path>, height: usize, width: usize, pixels: &[f64]) -> Result<()> {
    std::fs::write(path, encode(height, width, pixels)?)?;
    Ok(())
}

pub fn read(path: impl AsRef<Path>) -> Result<Frame> {
    decode(&std::fs::read(path)?)
}
