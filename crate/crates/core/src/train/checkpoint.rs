//! `HPNC` checkpoint files: configuration, parameters, optimizer moments
//! and the training RNG position, all little-endian.
//!
//! ```text
//! "HPNC" u32 version
//! string config                      (u32 length + UTF-8 key = value text)
//! u32 n_tensors, then per tensor: string name, u32 rank, u32 dims[rank], f64 data
//! f64 lr, beta1, beta2, eps; u64 step; per tensor: f64 m[len], f64 v[len]
//! u8 seed[32], u64 word_pos_lo, u64 word_pos_hi, u64 stream
//! u64 epoch
//! ```

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::optimizer::{Adam, AdamConfig};
use crate::config::HpnetConfig;
use crate::error::{HpnetError, Result};
use crate::io::{put_f64s, put_string, put_u32, put_u64, Reader};
use crate::params::{Param, ParamStore};

pub const MAGIC: &[u8; 4] = b"HPNC";
pub const VERSION: u32 = 1;

/// Everything needed to continue training exactly where it stopped.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: HpnetConfig,
    pub params: ParamStore,
    pub optimizer: Adam,
    pub rng: ChaCha8Rng,
    /// Completed epochs.
    pub epoch: usize,
}

fn u32_of(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| HpnetError::contract(format!("{what} {n} exceeds u32")))
}

impl Checkpoint {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        put_string(&mut out, &self.config.to_text())?;
        put_u32(&mut out, u32_of(self.params.len(), "tensor count")?);
        for p in self.params.iter() {
            put_string(&mut out, &p.name)?;
            put_u32(&mut out, u32_of(p.shape.len(), "rank")?);
            for &d in &p.shape {
                put_u32(&mut out, u32_of(d, "dimension")?);
            }
            put_f64s(&mut out, &p.data);
        }
        let opt = &self.optimizer;
        put_f64s(
            &mut out,
            &[opt.config.lr, opt.config.beta1, opt.config.beta2, opt.config.eps],
        );
        put_u64(&mut out, opt.step);
        if opt.m.len() != self.params.len() {
            return Err(HpnetError::contract("optimizer state does not match parameters"));
        }
        for (m, v) in opt.m.iter().zip(&opt.v) {
            put_f64s(&mut out, m);
            put_f64s(&mut out, v);
        }
        out.extend_from_slice(&self.rng.get_seed());
        let pos = self.rng.get_word_pos();
        put_u64(&mut out, pos as u64);
        put_u64(&mut out, (pos >> 64) as u64);
        put_u64(&mut out, self.rng.get_stream());
        put_u64(&mut out, self.epoch as u64);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(MAGIC)?;
        let at = r.offset();
        let version = r.u32()?;
        if version != VERSION {
            return Err(HpnetError::format(
                at,
                format!("unsupported checkpoint version {version}, expected {VERSION}"),
            ));
        }
        let at = r.offset();
        let config = HpnetConfig::from_text(&r.string()?)
            .map_err(|e| HpnetError::format(at, format!("bad embedded config: {e}")))?;
        let n = r.u32()? as usize;
        let mut params = Vec::with_capacity(n.min(1024));
        for _ in 0..n {
            let name = r.string()?;
            let rank = r.u32()? as usize;
            let mut shape = Vec::with_capacity(rank.min(8));
            for _ in 0..rank {
                shape.push(r.u32()? as usize);
            }
            let len = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
            let len = len.ok_or_else(|| HpnetError::format(r.offset(), "tensor size overflows"))?;
            let data = r.f64s(len)?;
            params.push(Param { name, shape, data });
        }
        let at = r.offset();
        let params = ParamStore::from_params(&config, params).map_err(|e| HpnetError::format(at, e.to_string()))?;
        let hyper = r.f64s(4)?;
        let step = r.u64()?;
        let mut m = Vec::with_capacity(params.len());
        let mut v = Vec::with_capacity(params.len());
        for p in params.iter() {
            m.push(r.f64s(p.data.len())?);
            v.push(r.f64s(p.data.len())?);
        }
        let optimizer = Adam {
            config: AdamConfig {
                lr: hyper[0],
                beta1: hyper[1],
                beta2: hyper[2],
                eps: hyper[3],
            },
            step,
            m,
            v,
        };
        let seed: [u8; 32] = r.bytes(32)?.try_into().expect("32 bytes");
        let lo = r.u64()? as u128;
        let hi = r.u64()? as u128;
        let stream = r.u64()?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(stream);
        rng.set_word_pos(lo | (hi << 64));
        let epoch = r.u64()? as usize;
        r.finish()?;
        Ok(Checkpoint {
            config,
            params,
            optimizer,
            rng,
            epoch,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.encode()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Scheme;
    use rand::Rng;

    fn sample() -> Checkpoint {
        let config = HpnetConfig::new(Scheme::BlockToBlock, vec![2, 3], 8, 8).with_block_depth(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params = ParamStore::init(&config, &mut rng);
        let mut optimizer = Adam::new(AdamConfig::default(), &params);
        optimizer.step = 7;
        optimizer.m[0][0] = 0.25;
        optimizer.v[1][2] = 1e-9;
        let _: u64 = rng.random();
        Checkpoint {
            config,
            params,
            optimizer,
            rng,
            epoch: 3,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let ck = sample();
        let bytes = ck.encode().unwrap();
        let back = Checkpoint::decode(&bytes).unwrap();
        assert_eq!(back.config, ck.config);
        assert_eq!(back.params, ck.params);
        assert_eq!(back.optimizer, ck.optimizer);
        assert_eq!(back.epoch, 3);
        assert_eq!(back.encode().unwrap(), bytes);
        let (mut a, mut b) = (ck.rng.clone(), back.rng.clone());
        assert_eq!(a.random::<u64>(), b.random::<u64>());
    }

    #[test]
    fn wrong_version_is_explicit() {
        let mut bytes = sample().encode().unwrap();
        bytes[4] = 9;
        let err = Checkpoint::decode(&bytes).unwrap_err();
        assert!(matches!(err, HpnetError::Format { offset: 4, .. }));
        assert!(err.to_string().contains("version 9"));
    }

    #[test]
    fn truncation_is_a_format_error() {
        let bytes = sample().encode().unwrap();
        for cut in [0, 3, 10, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(
                Checkpoint::decode(&bytes[..cut]),
                Err(HpnetError::Format { .. })
            ));
        }
    }

    #[test]
    fn bad_magic_names_hpnc() {
        let mut bytes = sample().encode().unwrap();
        bytes[0] = b'X';
        assert!(Checkpoint::decode(&bytes).unwrap_err().to_string().contains("HPNC"));
    }
}
