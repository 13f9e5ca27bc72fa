//! `HPND` dataset files.
//!
//! Layout, all integers little-endian:
//!
//! | field | type |
//! |---|---|
//! | magic `HPND` | 4 bytes |
//! | version (1) | u32 |
//! | sequence count, frames per sequence, height, width | u32 each |
//! | movement label per sequence | u8 each |
//! | pixels `round(255 p)`, sequence, frame, row-major | u8 each |

use std::fs;
use std::path::Path;

use crate::data::{MovementClass, Sequence};
use crate::error::{HpnetError, Result};
use crate::io::Reader;

pub const MAGIC: &[u8; 4] = b"HPND";
pub const VERSION: u32 = 1;

pub fn quantize(p: f64) -> u8 {
    (p.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn dequantize(b: u8) -> f64 {
    f64::from(b) / 255.0
}

pub fn encode(sequences: &[Sequence]) -> Result<Vec<u8>> {
    let (n_frames, h, w) = match sequences.first() {
        Some(s) => (s.n_frames(), s.height, s.width),
        None => (0, 0, 0),
    };
    for (i, s) in sequences.iter().enumerate() {
        if (s.n_frames(), s.height, s.width) != (n_frames, h, w) {
            return Err(HpnetError::contract(format!(
                "sequence {i} is {}x{}x{}, dataset is {n_frames}x{h}x{w}",
                s.n_frames(),
                s.height,
                s.width
            )));
        }
        if s.frames.iter().any(|f| f.len() != h * w) {
            return Err(HpnetError::contract(format!(
                "sequence {i} has a frame of the wrong size"
            )));
        }
    }
    let header = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| HpnetError::contract(format!("{what} {v} does not fit in u32")))
    };
    let mut out = Vec::with_capacity(24 + sequences.len() * (1 + n_frames * h * w));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for (v, what) in [
        (sequences.len(), "sequence count"),
        (n_frames, "frame count"),
        (h, "height"),
        (w, "width"),
    ] {
        out.extend_from_slice(&header(v, what)?.to_le_bytes());
    }
    out.extend(sequences.iter().map(|s| s.label.label()));
    for s in sequences {
        for f in &s.frames {
            out.extend(f.iter().map(|&p| quantize(p)));
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Vec<Sequence>> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(HpnetError::format(
            4,
            format!("unsupported dataset version {version}, expected {VERSION}"),
        ));
    }
    let n = r.u32()? as usize;
    let n_frames = r.u32()? as usize;
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    let label_offset = r.offset();
    let labels = r.bytes(n)?.to_vec();
    let plane = h * w;
    let mut sequences = Vec::with_capacity(n);
    for (i, &label) in labels.iter().enumerate() {
        let label = MovementClass::from_label(label)
            .ok_or_else(|| HpnetError::format(label_offset + i as u64, format!("unknown movement label {label}")))?;
        let mut frames = Vec::with_capacity(n_frames);
        for _ in 0..n_frames {
            frames.push(r.bytes(plane)?.iter().map(|&b| dequantize(b)).collect());
        }
        sequences.push(Sequence {
            label,
            height: h,
            width: w,
            frames,
        });
    }
    r.finish()?;
    Ok(sequences)
}

pub fn write_dataset(path: impl AsRef<Path>, sequences: &[Sequence]) -> Result<()> {
    fs::write(path, encode(sequences)?)?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<Sequence>> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_dataset, SequenceSpec};

    #[test]
    fn empty_dataset_is_header_only() {
        let bytes = encode(&[]).unwrap();
        assert_eq!(bytes.len(), 24);
        assert_eq!(&bytes[..4], b"HPND");
        assert!(decode(&bytes).unwrap().is_empty());
    }

    #[test]
    fn round_trip() {
        let spec = SequenceSpec {
            n_frames: 6,
            height: 16,
            width: 16,
            size_range: (3, 5),
            ..SequenceSpec::default()
        };
        let seqs = generate_dataset(&spec, 3, 11, true).unwrap();
        let bytes = encode(&seqs).unwrap();
        assert_eq!(bytes.len(), 24 + 3 + 3 * 6 * 256);
        assert_eq!(decode(&bytes).unwrap(), seqs);
    }

    #[test]
    fn bad_magic_names_the_expected_one() {
        let mut bytes = encode(&[]).unwrap();
        bytes[0] = b'X';
        let msg = decode(&bytes).unwrap_err().to_string();
        assert!(msg.contains("HPND"), "{msg}");
        assert!(msg.contains("byte 0"), "{msg}");
    }

    #[test]
    fn truncation_reports_offset() {
        let spec = SequenceSpec {
            n_frames: 2,
            height: 8,
            width: 8,
            size_range: (2, 3),
            ..SequenceSpec::default()
        };
        let bytes = encode(&generate_dataset(&spec, 2, 1, false).unwrap()).unwrap();
        let err = decode(&bytes[..bytes.len() - 10]).unwrap_err();
        assert!(matches!(err, HpnetError::Format { offset, .. } if offset > 24));
        assert!(decode(&bytes[..10]).is_err());
    }

    #[test]
    fn wrong_version_is_rejected() {
        let mut bytes = encode(&[]).unwrap();
        bytes[4] = 2;
        assert!(decode(&bytes).unwrap_err().to_string().contains("version"));
    }

    #[test]
    fn quantization_is_exact_on_the_grid() {
        for b in 0..=255u8 {
            assert_eq!(quantize(dequantize(b)), b);
        }
    }
}
