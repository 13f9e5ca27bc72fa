//! Network hyperparameters and the line-oriented `key=value` run configuration.

use std::fmt;
use std::str::FromStr;

use crate::error::{HpnetError, Result};

/// How consecutive inputs relate to the prediction target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Single frames in, single frames out, 2D kernels.
    FrameToFrame,
    /// Overlapping blocks sliding one frame per step; each step contributes
    /// one new frame.
    BlockToFrame,
    /// Non-overlapping blocks; each step predicts a whole block.
    BlockToBlock,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::FrameToFrame => "ff",
            Scheme::BlockToFrame => "bf",
            Scheme::BlockToBlock => "bb",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = HpnetError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ff" => Ok(Scheme::FrameToFrame),
            "bf" => Ok(Scheme::BlockToFrame),
            "bb" => Ok(Scheme::BlockToBlock),
            other => Err(HpnetError::config(
                "scheme",
                format!("expected ff, bf or bb, got `{other}`"),
            )),
        }
    }
}

pub const DEFAULT_BLOCK_DEPTH: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct HpnetConfig {
    /// Channel count of each level, bottom first. Its length is the level count.
    pub channels: Vec<usize>,
    pub block_depth: usize,
    pub block_stride: usize,
    pub scheme: Scheme,
    pub frame_height: usize,
    pub frame_width: usize,
    /// Loss weight of each level.
    pub level_weights: Vec<f64>,
    /// Saturation level of bottom-level predictions.
    pub p_max: f64,
}

impl HpnetConfig {
    /// Defaults for `scheme`: blocks of five frames (one for frame-to-frame),
    /// stride matching the scheme, level weights 1.0 then 0.1.
    pub fn new(scheme: Scheme, channels: Vec<usize>, frame_height: usize, frame_width: usize) -> Self {
        let (block_depth, block_stride) = match scheme {
            Scheme::FrameToFrame => (1, 1),
            Scheme::BlockToFrame => (DEFAULT_BLOCK_DEPTH, 1),
            Scheme::BlockToBlock => (DEFAULT_BLOCK_DEPTH, DEFAULT_BLOCK_DEPTH),
        };
        let level_weights = default_level_weights(channels.len());
        HpnetConfig {
            channels,
            block_depth,
            block_stride,
            scheme,
            frame_height,
            frame_width,
            level_weights,
            p_max: 1.0,
        }
    }

    /// Same scheme defaults with an explicit block depth.
    pub fn with_block_depth(mut self, depth: usize) -> Self {
        self.block_depth = depth;
        self.block_stride = match self.scheme {
            Scheme::BlockToBlock => depth,
            _ => 1,
        };
        self
    }

    pub fn levels(&self) -> usize {
        self.channels.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() {
            return Err(HpnetError::config("levels", "at least one level is required"));
        }
        if self.channels.contains(&0) {
            return Err(HpnetError::config("channels", "channel counts must be positive"));
        }
        if self.level_weights.len() != self.levels() {
            return Err(HpnetError::config(
                "level_weights",
                format!("expected {} weights, got {}", self.levels(), self.level_weights.len()),
            ));
        }
        if self.level_weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(HpnetError::config(
                "level_weights",
                "weights must be finite and non-negative",
            ));
        }
        if self.block_depth == 0 || self.block_stride == 0 || self.block_stride > self.block_depth {
            return Err(HpnetError::config(
                "block_stride",
                "need 1 <= block_stride <= block_depth",
            ));
        }
        match self.scheme {
            Scheme::FrameToFrame if self.block_depth != 1 => {
                return Err(HpnetError::config(
                    "block_depth",
                    "frame-to-frame requires block_depth 1",
                ));
            }
            Scheme::BlockToFrame if self.block_stride != 1 => {
                return Err(HpnetError::config(
                    "block_stride",
                    "block-to-frame requires block_stride 1",
                ));
            }
            Scheme::BlockToBlock if self.block_stride != self.block_depth => {
                return Err(HpnetError::config(
                    "block_stride",
                    "block-to-block requires block_stride == block_depth",
                ));
            }
            _ => {}
        }
        let scale = 1 << (self.levels() - 1);
        if self.frame_height == 0
            || self.frame_width == 0
            || !self.frame_height.is_multiple_of(scale)
            || !self.frame_width.is_multiple_of(scale)
        {
            return Err(HpnetError::config(
                "frame_size",
                format!(
                    "{}x{} is not divisible by {scale} for {} levels",
                    self.frame_height,
                    self.frame_width,
                    self.levels()
                ),
            ));
        }
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return Err(HpnetError::config("p_max", "must be positive"));
        }
        Ok(())
    }

    /// `(k_t, k_h, k_w)` of every kernel.
    pub fn kernel_extent(&self) -> (usize, usize, usize) {
        match self.scheme {
            Scheme::FrameToFrame => (1, 3, 3),
            _ => (3, 3, 3),
        }
    }

    /// Spatial size of level `level` (0-based).
    pub fn level_size(&self, level: usize) -> (usize, usize) {
        (self.frame_height >> level, self.frame_width >> level)
    }

    /// Shape `[c, d, h, w]` of the state tensors at `level`.
    pub fn state_shape(&self, level: usize) -> [usize; 4] {
        let (h, w) = self.level_size(level);
        [self.channels[level], self.block_depth, h, w]
    }

    /// Channels of the input a level predicts: one grayscale channel at the
    /// bottom, the channel count of the level below elsewhere.
    pub fn input_channels(&self, level: usize) -> usize {
        if level == 0 {
            1
        } else {
            self.channels[level - 1]
        }
    }

    pub fn input_shape(&self, level: usize) -> [usize; 4] {
        let (h, w) = self.level_size(level);
        [self.input_channels(level), self.block_depth, h, w]
    }

    /// Channels of the bottom-up drive entering the recurrent unit.
    pub fn drive_channels(&self, level: usize) -> usize {
        if level == 0 {
            1
        } else {
            2 * self.channels[level - 1]
        }
    }

    /// Channels of the recurrent unit's external input: drive, same-level
    /// error, and the upsampled state of the level above when there is one.
    pub fn lstm_input_channels(&self, level: usize) -> usize {
        let top_down = self.channels.get(level + 1).copied().unwrap_or(0);
        self.drive_channels(level) + self.channels[level] + top_down
    }

    /// Weight of step `k` in a sequence of `steps` blocks: nothing for the
    /// first step, uniform afterwards.
    pub fn step_weight(&self, k: usize, steps: usize) -> f64 {
        if k == 0 || steps < 2 {
            0.0
        } else {
            1.0 / (steps - 1) as f64
        }
    }

    /// Serializes as `key=value` lines; [`HpnetConfig::from_text`] inverts it exactly.
    pub fn to_text(&self) -> String {
        format!(
            "scheme={}\nchannels={}\nblock_depth={}\nblock_stride={}\nframe_size={}x{}\nlevel_weights={}\np_max={}\n",
            self.scheme,
            join(&self.channels),
            self.block_depth,
            self.block_stride,
            self.frame_height,
            self.frame_width,
            join(&self.level_weights),
            self.p_max
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut scheme = None;
        let mut channels = None;
        let mut depth = None;
        let mut stride = None;
        let mut size = None;
        let mut weights = None;
        let mut p_max = None;
        for (key, value) in key_values(text)? {
            match key {
                "scheme" => scheme = Some(value.parse()?),
                "channels" => channels = Some(parse_list(key, value)?),
                "block_depth" => depth = Some(parse_value(key, value)?),
                "block_stride" => stride = Some(parse_value(key, value)?),
                "frame_size" => size = Some(parse_frame_size(value)?),
                "level_weights" => weights = Some(parse_list(key, value)?),
                "p_max" => p_max = Some(parse_value(key, value)?),
                other => return Err(HpnetError::config(other, "unknown key")),
            }
        }
        let missing = |key: &str| HpnetError::config(key, "missing");
        let (h, w) = size.ok_or_else(|| missing("frame_size"))?;
        let config = HpnetConfig {
            channels: channels.ok_or_else(|| missing("channels"))?,
            block_depth: depth.ok_or_else(|| missing("block_depth"))?,
            block_stride: stride.ok_or_else(|| missing("block_stride"))?,
            scheme: scheme.ok_or_else(|| missing("scheme"))?,
            frame_height: h,
            frame_width: w,
            level_weights: weights.ok_or_else(|| missing("level_weights"))?,
            p_max: p_max.ok_or_else(|| missing("p_max"))?,
        };
        config.validate()?;
        Ok(config)
    }
}

pub fn default_level_weights(levels: usize) -> Vec<f64> {
    (0..levels).map(|l| if l == 0 { 1.0 } else { 0.1 }).collect()
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// Non-blank, non-comment `key=value` lines with surrounding whitespace trimmed.
pub(crate) fn key_values(text: &str) -> Result<Vec<(&str, &str)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(HpnetError::config(line, format!("line {} is not key=value", n + 1)));
        };
        out.push((key.trim(), value.trim()));
    }
    Ok(out)
}

pub(crate) fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| HpnetError::config(key, format!("cannot parse `{value}`")))
}

pub(crate) fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| parse_value(key, v.trim())).collect()
}

/// `HxW` or a single number for square frames.
pub(crate) fn parse_frame_size(value: &str) -> Result<(usize, usize)> {
    match value.split_once(['x', 'X']) {
        Some((h, w)) => Ok((
            parse_value("frame_size", h.trim())?,
            parse_value("frame_size", w.trim())?,
        )),
        None => {
            let s = parse_value("frame_size", value)?;
            Ok((s, s))
        }
    }
}
