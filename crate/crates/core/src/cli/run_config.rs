use std::path::PathBuf;

use crate::config::{key_values, parse_frame_size, parse_list, parse_value, HpnetConfig, Scheme};
use crate::error::{HpnetError, Result};
use crate::train::{AdamConfig, TrainOptions};

/// Channel counts used when only a level count is given.
pub const DEFAULT_CHANNELS: [usize; 4] = [8, 16, 32, 64];

/// Every setting a command may read, from a `key=value` file and flag
/// overrides. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scheme: Scheme,
    pub levels: Option<usize>,
    pub channels: Option<Vec<usize>>,
    pub block_depth: Option<usize>,
    pub block_stride: Option<usize>,
    pub frame_size: (usize, usize),
    pub level_weights: Option<Vec<f64>>,
    pub p_max: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub validate_every: usize,
    pub seed: u64,
    pub data: Option<PathBuf>,
    pub val_data: Option<PathBuf>,
    pub out: PathBuf,
    pub checkpoint: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scheme: Scheme::BlockToBlock,
            levels: None,
            channels: None,
            block_depth: None,
            block_stride: None,
            frame_size: (32, 32),
            level_weights: None,
            p_max: 1.0,
            lr: AdamConfig::default().lr,
            epochs: 20,
            batch_size: 1,
            clip_norm: 10.0,
            validate_every: 1,
            seed: 0,
            data: None,
            val_data: None,
            out: PathBuf::from("."),
            checkpoint: None,
        }
    }
}

impl RunConfig {
    pub const KEYS: [&'static str; 18] = [
        "scheme",
        "levels",
        "channels",
        "block_depth",
        "block_stride",
        "frame_size",
        "level_weights",
        "p_max",
        "lr",
        "epochs",
        "batch_size",
        "clip_norm",
        "validate_every",
        "seed",
        "data",
        "val_data",
        "out",
        "checkpoint",
    ];

    pub fn from_text(text: &str) -> Result<Self> {
        let mut rc = RunConfig::default();
        for (key, value) in key_values(text)? {
            rc.set(key, value)?;
        }
        Ok(rc)
    }

    /// Applies one setting; the error names the offending key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "scheme" => self.scheme = value.parse()?,
            "levels" => self.levels = Some(parse_value(key, value)?),
            "channels" => self.channels = Some(parse_list(key, value)?),
            "block_depth" => self.block_depth = Some(parse_value(key, value)?),
            "block_stride" => self.block_stride = Some(parse_value(key, value)?),
            "frame_size" => self.frame_size = parse_frame_size(value)?,
            "level_weights" => self.level_weights = Some(parse_list(key, value)?),
            "p_max" => self.p_max = parse_value(key, value)?,
            "lr" => self.lr = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "clip_norm" => self.clip_norm = parse_value(key, value)?,
            "validate_every" => self.validate_every = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "data" => self.data = Some(PathBuf::from(value)),
            "val_data" => self.val_data = Some(PathBuf::from(value)),
            "out" => self.out = PathBuf::from(value),
            "checkpoint" => self.checkpoint = Some(PathBuf::from(value)),
            other => return Err(HpnetError::config(other, "unknown key")),
        }
        Ok(())
    }

    /// The network this run describes, validated.
    pub fn network(&self) -> Result<HpnetConfig> {
        let channels = match (&self.channels, self.levels) {
            (Some(c), Some(l)) if c.len() != l => {
                return Err(HpnetError::config(
                    "channels",
                    format!("{} channel counts for {l} levels", c.len()),
                ))
            }
            (Some(c), _) => c.clone(),
            (None, l) => {
                let l = l.unwrap_or(2);
                if l == 0 || l > DEFAULT_CHANNELS.len() {
                    return Err(HpnetError::config(
                        "levels",
                        format!(
                            "without explicit channels, levels must be 1..={}",
                            DEFAULT_CHANNELS.len()
                        ),
                    ));
                }
                DEFAULT_CHANNELS[..l].to_vec()
            }
        };
        let (h, w) = self.frame_size;
        let mut config = HpnetConfig::new(self.scheme, channels, h, w);
        if let Some(d) = self.block_depth {
            config = config.with_block_depth(d);
        }
        if let Some(s) = self.block_stride {
            config.block_stride = s;
        }
        if let Some(wts) = &self.level_weights {
            config.level_weights = wts.clone();
        }
        config.p_max = self.p_max;
        config.validate()?;
        Ok(config)
    }

    pub fn train_options(&self) -> Result<TrainOptions> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(HpnetError::config("lr", "must be finite and non-negative"));
        }
        if self.batch_size == 0 {
            return Err(HpnetError::config("batch_size", "must be at least 1"));
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return Err(HpnetError::config("clip_norm", "must be positive"));
        }
        Ok(TrainOptions {
            adam: AdamConfig {
                lr: self.lr,
                ..AdamConfig::default()
            },
            batch_size: self.batch_size,
            clip_norm: self.clip_norm,
            validate_every: self.validate_every,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_and_comments() {
        let rc = RunConfig::from_text("# run\nscheme = ff\nchannels=4,6 # two levels\nlr=0.01\n").unwrap();
        let net = rc.network().unwrap();
        assert_eq!(net.scheme, Scheme::FrameToFrame);
        assert_eq!(net.channels, vec![4, 6]);
        assert_eq!(rc.lr, 0.01);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_text("epochs=3\nwarp_factor=9\n").unwrap_err();
        assert!(matches!(err, HpnetError::Config { ref key, .. } if key == "warp_factor"));
    }

    #[test]
    fn levels_pick_default_channels() {
        let mut rc = RunConfig::default();
        rc.set("levels", "3").unwrap();
        assert_eq!(rc.network().unwrap().channels, vec![8, 16, 32]);
        rc.set("channels", "1,2").unwrap();
        assert!(rc.network().is_err());
    }

    #[test]
    fn every_key_is_settable() {
        let samples = [
            "bb", "2", "4,8", "5", "5", "32x32", "1,0.1", "1", "0.001", "1", "1", "10", "1", "3", "a", "b", "c", "d",
        ];
        let mut rc = RunConfig::default();
        for (k, v) in RunConfig::KEYS.iter().zip(samples) {
            rc.set(k, v).unwrap();
        }
        rc.network().unwrap();
    }
}
