use crate::error::{HpnetError, Result};

/// Little-endian cursor that reports the byte offset of every failure.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    pub fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                HpnetError::format(
                    self.pos as u64,
                    format!("truncated: needed {n} bytes, {} remain", self.bytes.len() - self.pos),
                )
            })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let at = self.pos as u64;
        let found = self.bytes(4).map_err(|_| {
            HpnetError::format(
                at,
                format!("missing magic, expected \"{}\"", String::from_utf8_lossy(magic)),
            )
        })?;
        if found != magic {
            return Err(HpnetError::format(
                at,
                format!(
                    "bad magic {:?}, expected \"{}\"",
                    String::from_utf8_lossy(found),
                    String::from_utf8_lossy(magic)
                ),
            ));
        }
        Ok(())
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().expect("8 bytes")))
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.bytes(
            n.checked_mul(8)
                .ok_or_else(|| HpnetError::format(self.pos as u64, "length overflow"))?,
        )?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    /// u32 length followed by UTF-8 bytes.
    pub fn string(&mut self) -> Result<String> {
        let at = self.pos as u64;
        let n = self.u32()? as usize;
        let raw = self.bytes(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| HpnetError::format(at, "string is not UTF-8"))
    }

    /// Fails unless every byte was consumed.
    pub fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(HpnetError::format(
                self.pos as u64,
                format!("{} trailing bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_f64s(out: &mut Vec<u8>, v: &[f64]) {
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

pub(crate) fn put_string(out: &mut Vec<u8>, s: &str) -> Result<()> {
    let n = u32::try_from(s.len()).map_err(|_| HpnetError::contract("string longer than u32::MAX"))?;
    put_u32(out, n);
    out.extend_from_slice(s.as_bytes());
    Ok(())
}
