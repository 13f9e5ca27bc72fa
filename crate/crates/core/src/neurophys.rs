//! Stimulus protocols for prediction and familiarity suppression, and the
//! population response traces recorded from a network while it watches them.

use std::fmt::{self, Write as _};
use std::ops::Range;
use std::str::FromStr;
use std::time::Instant;

use hpnet_tensor::Tensor;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::HpnetConfig;
use crate::data::{extract_blocks, MovementClass, Sequence};
use crate::error::{HpnetError, Result};
use crate::model::Network;
use crate::params::ParamStore;
use crate::train::{TrainOptions, TrainRecord, Trainer};

/// Intensity of a blank frame.
pub const GRAY: f64 = 0.5;

pub const TRACE_HEADER: &str = "# hpnet-neurophys v1";

/// Frame counts of the two protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Protocol {
    pub gray_lead: usize,
    pub image1: usize,
    pub gap: usize,
    pub image2: usize,
    /// Presentation length in the familiarity protocol.
    pub static_duration: usize,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            gray_lead: 5,
            image1: 10,
            gap: 2,
            image2: 10,
            static_duration: 15,
        }
    }
}

impl Protocol {
    fn check(&self) -> Result<()> {
        if [self.image1, self.image2, self.static_duration].contains(&0) {
            return Err(HpnetError::contract("image presentations must last at least one frame"));
        }
        Ok(())
    }

    pub fn paired_len(&self) -> usize {
        self.gray_lead + self.image1 + self.gap + self.image2
    }

    pub fn static_len(&self) -> usize {
        self.gray_lead + self.static_duration
    }

    /// Frames showing the second image of a pair.
    pub fn second_image_window(&self) -> Range<usize> {
        let start = self.gray_lead + self.image1 + self.gap;
        start..start + self.image2
    }

    /// Final `n` frames of a static presentation.
    pub fn late_window(&self, n: usize) -> Range<usize> {
        let end = self.static_len();
        end - n.min(self.static_duration)..end
    }

    pub fn paired(&self, first: &[f64], second: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check()?;
        if first.len() != second.len() {
            return Err(HpnetError::contract("paired images differ in size"));
        }
        let gray = vec![GRAY; first.len()];
        let mut frames = vec![gray.clone(); self.gray_lead];
        frames.extend(std::iter::repeat_n(first.to_vec(), self.image1));
        frames.extend(std::iter::repeat_n(gray, self.gap));
        frames.extend(std::iter::repeat_n(second.to_vec(), self.image2));
        Ok(frames)
    }

    pub fn static_presentation(&self, image: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check()?;
        let mut frames = vec![vec![GRAY; image.len()]; self.gray_lead];
        frames.extend(std::iter::repeat_n(image.to_vec(), self.static_duration));
        Ok(frames)
    }
}

/// `n` distinct seeded textures: each a sum of two oriented gratings
/// spanning `[0, 1]`.
pub fn texture_pool(n: usize, height: usize, width: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let gratings: Vec<(f64, f64, f64)> = (0..2)
                .map(|_| {
                    let theta = rng.random_range(0.0..std::f64::consts::PI);
                    let freq = rng.random_range(0.08..0.3) * std::f64::consts::TAU;
                    let phase = rng.random_range(0.0..std::f64::consts::TAU);
                    (theta.cos() * freq, theta.sin() * freq, phase)
                })
                .collect();
            let mut img = Vec::with_capacity(height * width);
            for y in 0..height {
                for x in 0..width {
                    let s: f64 = gratings
                        .iter()
                        .map(|&(ky, kx, phase)| (ky * y as f64 + kx * x as f64 + phase).sin())
                        .sum();
                    img.push(0.5 + 0.25 * s);
                }
            }
            img
        })
        .collect()
}

/// Predicted pairs `(a_i, b_i)` and their unpredicted reorderings
/// `(a_i, b_{i+1})`: both conditions show exactly the same images.
#[derive(Debug, Clone)]
pub struct PairedStimuli {
    pub predicted: Vec<Vec<Vec<f64>>>,
    pub unpredicted: Vec<Vec<Vec<f64>>>,
}

pub fn paired_stimuli(protocol: &Protocol, pool: &[Vec<f64>], n_pairs: usize, seed: u64) -> Result<PairedStimuli> {
    if n_pairs < 2 {
        return Err(HpnetError::contract("reordering pairs needs at least two pairs"));
    }
    if pool.len() < 2 * n_pairs {
        return Err(HpnetError::contract(format!(
            "{n_pairs} pairs need {} images, pool has {}",
            2 * n_pairs,
            pool.len()
        )));
    }
    let mut idx: Vec<usize> = (0..pool.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let first = &idx[..n_pairs];
    let second = &idx[n_pairs..2 * n_pairs];
    let mut predicted = Vec::with_capacity(n_pairs);
    let mut unpredicted = Vec::with_capacity(n_pairs);
    for i in 0..n_pairs {
        predicted.push(protocol.paired(&pool[first[i]], &pool[second[i]])?);
        unpredicted.push(protocol.paired(&pool[first[i]], &pool[second[(i + 1) % n_pairs]])?);
    }
    Ok(PairedStimuli { predicted, unpredicted })
}

/// Static presentations of two disjoint image sets.
#[derive(Debug, Clone)]
pub struct FamiliarityStimuli {
    pub familiar: Vec<Vec<Vec<f64>>>,
    pub novel: Vec<Vec<Vec<f64>>>,
}

pub fn familiarity_stimuli(
    protocol: &Protocol,
    pool: &[Vec<f64>],
    per_set: usize,
    seed: u64,
) -> Result<FamiliarityStimuli> {
    if per_set == 0 || pool.len() < 2 * per_set {
        return Err(HpnetError::contract(format!(
            "two sets of {per_set} images need a pool of {}, found {}",
            2 * per_set,
            pool.len()
        )));
    }
    let mut idx: Vec<usize> = (0..pool.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let present = |ids: &[usize]| {
        ids.iter()
            .map(|&i| protocol.static_presentation(&pool[i]))
            .collect::<Result<Vec<_>>>()
    };
    Ok(FamiliarityStimuli {
        familiar: present(&idx[..per_set])?,
        novel: present(&idx[per_set..2 * per_set])?,
    })
}

/// Appends gray frames until blocks of `depth` taken every `stride`
/// frames cover the whole clip.
pub fn pad_to_blocks(frames: &[Vec<f64>], depth: usize, stride: usize) -> Vec<Vec<f64>> {
    let mut out = frames.to_vec();
    if let Some(plane) = frames.first().map(Vec::len) {
        while out.len() < depth || !(out.len() - depth).is_multiple_of(stride.max(1)) {
            out.push(vec![GRAY; plane]);
        }
    }
    out
}

/// Which population a trace averages over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnitKind {
    /// Prediction error.
    E,
    /// Prediction.
    P,
    /// Representation.
    R,
}

impl UnitKind {
    pub const ALL: [UnitKind; 3] = [UnitKind::E, UnitKind::P, UnitKind::R];
}

impl fmt::Display for UnitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnitKind::E => "E",
            UnitKind::P => "P",
            UnitKind::R => "R",
        })
    }
}

impl FromStr for UnitKind {
    type Err = HpnetError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "E" | "e" => Ok(UnitKind::E),
            "P" | "p" => Ok(UnitKind::P),
            "R" | "r" => Ok(UnitKind::R),
            _ => Err(HpnetError::config("unit_kind", format!("`{s}` is not one of E, P, R"))),
        }
    }
}

/// Mean absolute activation over the central half (in each spatial
/// dimension) of every temporal slice of a `[c, d, h, w]` tensor.
fn centre_means(t: &Tensor) -> Vec<f64> {
    let &[c, d, h, w] = t.shape() else {
        unreachable!("unit tensors are 4D")
    };
    let (y0, y1) = (h / 4, h - h / 4);
    let (x0, x1) = (w / 4, w - w / 4);
    let count = (c * (y1 - y0) * (x1 - x0)) as f64;
    let data = t.data();
    (0..d)
        .map(|s| {
            let mut sum = 0.0;
            for ch in 0..c {
                let plane = &data[(ch * d + s) * h * w..][..h * w];
                for y in y0..y1 {
                    sum += plane[y * w + x0..y * w + x1].iter().map(|v| v.abs()).sum::<f64>();
                }
            }
            sum / count
        })
        .collect()
}

/// Per-frame centre responses of one clip, indexed `[level][kind][frame]`
/// for kinds in [`UnitKind::ALL`] order. The clip is padded with gray to
/// whole blocks; a frame covered by several overlapping blocks takes the
/// latest block's value.
pub fn clip_responses(net: &Network, frames: &[Vec<f64>]) -> Result<Vec<[Vec<f64>; 3]>> {
    let c = net.config();
    let padded = pad_to_blocks(frames, c.block_depth, c.block_stride);
    let blocks = extract_blocks(&padded, c.frame_height, c.frame_width, c.block_depth, c.block_stride)?;
    let steps = net.trace(&blocks)?;
    let n = frames.len();
    let mut out: Vec<[Vec<f64>; 3]> = (0..c.levels())
        .map(|_| [vec![0.0; n], vec![0.0; n], vec![0.0; n]])
        .collect();
    for (k, step) in steps.iter().enumerate() {
        for (l, per_kind) in out.iter_mut().enumerate() {
            let sources = [
                &step.state.levels[l].error,
                &step.predictions[l],
                &step.state.levels[l].representation,
            ];
            for (trace, t) in per_kind.iter_mut().zip(sources) {
                for (j, v) in centre_means(t).into_iter().enumerate() {
                    if let Some(slot) = trace.get_mut(k * c.block_stride + j) {
                        *slot = v;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Condition-averaged per-frame response of `kind` units at `level`
/// (0-based) over equally long clips.
pub fn measure_responses(net: &Network, clips: &[Vec<Vec<f64>>], kind: UnitKind, level: usize) -> Result<Vec<f64>> {
    let all = measure_all(net, clips)?;
    let k = UnitKind::ALL.iter().position(|&u| u == kind).expect("listed kind");
    all.into_iter()
        .nth(level)
        .map(|mut per_kind| std::mem::take(&mut per_kind[k]))
        .ok_or_else(|| HpnetError::contract(format!("level {} does not exist", level + 1)))
}

/// [`clip_responses`] averaged over `clips`.
pub fn measure_all(net: &Network, clips: &[Vec<Vec<f64>>]) -> Result<Vec<[Vec<f64>; 3]>> {
    let first = clips
        .first()
        .ok_or_else(|| HpnetError::contract("no clips to measure"))?;
    let n = first.len();
    if clips.iter().any(|c| c.len() != n) {
        return Err(HpnetError::contract("clips of one condition must be equally long"));
    }
    let mut acc: Option<Vec<[Vec<f64>; 3]>> = None;
    for clip in clips {
        let r = clip_responses(net, clip)?;
        match &mut acc {
            None => acc = Some(r),
            Some(a) => {
                for (a, r) in a.iter_mut().zip(&r) {
                    for (a, r) in a.iter_mut().zip(r) {
                        a.iter_mut().zip(r).for_each(|(a, r)| *a += r);
                    }
                }
            }
        }
    }
    let mut acc = acc.expect("at least one clip");
    let scale = 1.0 / clips.len() as f64;
    acc.iter_mut().flatten().flatten().for_each(|v| *v *= scale);
    Ok(acc)
}

/// `(novel - familiar) / (novel + familiar)` of the window means; positive
/// when the familiar or predicted condition is suppressed.
pub fn suppression_index(novel: &[f64], familiar: &[f64], window: Range<usize>) -> Result<f64> {
    if novel.len() != familiar.len() {
        return Err(HpnetError::contract("traces differ in length"));
    }
    if window.is_empty() || window.end > novel.len() {
        return Err(HpnetError::contract(format!(
            "window {window:?} does not fit a trace of {} frames",
            novel.len()
        )));
    }
    let n = window.len() as f64;
    let a = novel[window.clone()].iter().sum::<f64>() / n;
    let b = familiar[window].iter().sum::<f64>() / n;
    if a + b == 0.0 {
        return Err(HpnetError::Undefined("suppression index of two silent traces".into()));
    }
    Ok((a - b) / (a + b))
}

/// One condition's averaged response of one population.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseTrace {
    pub condition: String,
    pub unit_kind: UnitKind,
    /// 1-based module index.
    pub level: usize,
    pub values: Vec<f64>,
}

/// Flattens [`measure_all`] output into labelled traces.
pub fn label_traces(condition: &str, responses: Vec<[Vec<f64>; 3]>) -> Vec<ResponseTrace> {
    let mut out = Vec::new();
    for (l, per_kind) in responses.into_iter().enumerate() {
        for (kind, values) in UnitKind::ALL.into_iter().zip(per_kind) {
            out.push(ResponseTrace {
                condition: condition.to_string(),
                unit_kind: kind,
                level: l + 1,
                values,
            });
        }
    }
    out
}

pub fn traces_to_text(traces: &[ResponseTrace]) -> String {
    let mut s = format!("{TRACE_HEADER}\n");
    for t in traces {
        for (frame, v) in t.values.iter().enumerate() {
            let _ = writeln!(s, "{frame}\t{}\t{}\t{}\t{v}", t.condition, t.unit_kind, t.level);
        }
    }
    s
}

/// Limits of an exposure run: whichever is reached first ends it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExposureOptions {
    pub epochs: usize,
    pub max_seconds: f64,
    pub train: TrainOptions,
    pub seed: u64,
}

/// Trains only on the exposed clips (padded to whole blocks with gray).
/// Returns the exposed parameters and the history, baseline first.
pub fn exposure_train(
    config: &HpnetConfig,
    params: &ParamStore,
    clips: &[Vec<Vec<f64>>],
    options: &ExposureOptions,
) -> Result<(ParamStore, Vec<TrainRecord>)> {
    let sequences: Vec<Sequence> = clips
        .iter()
        .map(|f| Sequence {
            label: MovementClass::StaticJitter,
            height: config.frame_height,
            width: config.frame_width,
            frames: pad_to_blocks(f, config.block_depth, config.block_stride),
        })
        .collect();
    let rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut trainer = Trainer::with_params(config.clone(), options.train, params.clone(), rng)?;
    let start = Instant::now();
    let mut history = vec![trainer.baseline(&sequences, &[])?];
    for _ in 0..options.epochs {
        if start.elapsed().as_secs_f64() >= options.max_seconds {
            break;
        }
        history.push(trainer.train_epoch(&sequences, &[])?);
    }
    Ok((trainer.params().clone(), history))
}

/// Suppression indices of one level, in [`UnitKind::ALL`] order; NaN where
/// both conditions are silent over the window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelIndices {
    /// 1-based module index.
    pub level: usize,
    pub values: [f64; 3],
}

impl LevelIndices {
    pub fn get(&self, kind: UnitKind) -> f64 {
        self.values[UnitKind::ALL.iter().position(|&k| k == kind).expect("listed kind")]
    }
}

/// Outcome of one protocol: traces before and after exposure, the indices
/// over the analysis window, and the exposure history.
#[derive(Debug, Clone)]
pub struct SuppressionResult {
    pub traces: Vec<ResponseTrace>,
    pub window: Range<usize>,
    pub pre: Vec<LevelIndices>,
    pub post: Vec<LevelIndices>,
    pub history: Vec<TrainRecord>,
}

fn indices(novel: &[[Vec<f64>; 3]], familiar: &[[Vec<f64>; 3]], window: &Range<usize>) -> Result<Vec<LevelIndices>> {
    novel
        .iter()
        .zip(familiar)
        .enumerate()
        .map(|(l, (n, f))| {
            let mut values = [0.0; 3];
            for k in 0..3 {
                values[k] = match suppression_index(&n[k], &f[k], window.clone()) {
                    Err(HpnetError::Undefined(_)) => f64::NAN,
                    other => other?,
                };
            }
            Ok(LevelIndices { level: l + 1, values })
        })
        .collect()
}

/// Measures `familiar` and `novel` clips before and after exposure to the
/// familiar ones only. Condition labels get `pre-`/`post-` prefixes.
fn exposure_experiment(
    config: &HpnetConfig,
    params: &ParamStore,
    familiar: (&str, &[Vec<Vec<f64>>]),
    novel: (&str, &[Vec<Vec<f64>>]),
    window: Range<usize>,
    options: &ExposureOptions,
) -> Result<SuppressionResult> {
    let mut traces = Vec::new();
    let mut measure = |phase: &str, p: &ParamStore| -> Result<Vec<LevelIndices>> {
        let net = Network::new(config, p, false)?;
        let f = measure_all(&net, familiar.1)?;
        let n = measure_all(&net, novel.1)?;
        let idx = indices(&n, &f, &window)?;
        traces.extend(label_traces(&format!("{phase}-{}", familiar.0), f));
        traces.extend(label_traces(&format!("{phase}-{}", novel.0), n));
        Ok(idx)
    };
    let pre = measure("pre", params)?;
    let (exposed, history) = exposure_train(config, params, familiar.1, options)?;
    let post = measure("post", &exposed)?;
    Ok(SuppressionResult {
        traces,
        window,
        pre,
        post,
        history,
    })
}

/// Image-pair sequence learning: exposure to fixed pairs, then responses to
/// the second image when it follows its usual partner or another one.
pub fn prediction_suppression(
    config: &HpnetConfig,
    params: &ParamStore,
    protocol: &Protocol,
    pool: &[Vec<f64>],
    n_pairs: usize,
    seed: u64,
    options: &ExposureOptions,
) -> Result<SuppressionResult> {
    let stimuli = paired_stimuli(protocol, pool, n_pairs, seed)?;
    exposure_experiment(
        config,
        params,
        ("predicted", &stimuli.predicted),
        ("unpredicted", &stimuli.unpredicted),
        protocol.second_image_window(),
        options,
    )
}

/// Static-image learning: exposure to a familiar set, then responses late
/// in the presentation of familiar and novel images.
#[allow(clippy::too_many_arguments)]
pub fn familiarity_suppression(
    config: &HpnetConfig,
    params: &ParamStore,
    protocol: &Protocol,
    pool: &[Vec<f64>],
    per_set: usize,
    late_frames: usize,
    seed: u64,
    options: &ExposureOptions,
) -> Result<SuppressionResult> {
    let stimuli = familiarity_stimuli(protocol, pool, per_set, seed)?;
    exposure_experiment(
        config,
        params,
        ("familiar", &stimuli.familiar),
        ("novel", &stimuli.novel),
        protocol.late_window(late_frames),
        options,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn protocol_lengths() {
        let p = Protocol::default();
        let img = vec![0.2; 4];
        assert_eq!(p.paired(&img, &img).unwrap().len(), 27);
        assert_eq!(p.static_presentation(&img).unwrap().len(), 20);
        assert_eq!(p.second_image_window(), 17..27);
        assert_eq!(p.late_window(5), 15..20);
    }

    #[test]
    fn index_edge_cases() {
        let a = [0.4, 0.2, 0.9];
        assert_eq!(suppression_index(&a, &a, 0..3).unwrap(), 0.0);
        assert_eq!(suppression_index(&a, &[0.0; 3], 0..3).unwrap(), 1.0);
        assert!(matches!(
            suppression_index(&[0.0; 3], &[0.0; 3], 1..2),
            Err(HpnetError::Undefined(_))
        ));
        assert!(suppression_index(&a, &a, 2..5).is_err());
    }

    #[test]
    fn unpredicted_pairs_reuse_the_same_images() {
        let pool = texture_pool(6, 8, 8, 3);
        let s = paired_stimuli(&Protocol::default(), &pool, 3, 1).unwrap();
        let w = Protocol::default().second_image_window();
        let mut pred: Vec<_> = s.predicted.iter().map(|c| c[w.start].clone()).collect();
        let mut unpred: Vec<_> = s.unpredicted.iter().map(|c| c[w.start].clone()).collect();
        for (p, u) in s.predicted.iter().zip(&s.unpredicted) {
            assert_eq!(p[5], u[5]);
            assert_ne!(p[w.start], u[w.start]);
        }
        pred.sort_by(|a, b| a.partial_cmp(b).unwrap());
        unpred.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(pred, unpred);
    }

    #[test]
    fn small_pools_are_rejected() {
        let pool = texture_pool(3, 4, 4, 0);
        assert!(paired_stimuli(&Protocol::default(), &pool, 2, 0).is_err());
        assert!(familiarity_stimuli(&Protocol::default(), &pool, 2, 0).is_err());
    }

    #[test]
    fn textures_span_the_unit_range_and_differ() {
        let pool = texture_pool(4, 16, 16, 9);
        assert!(pool.iter().flatten().all(|&v| (0.0..=1.0).contains(&v)));
        assert_ne!(pool[0], pool[1]);
        assert_eq!(pool, texture_pool(4, 16, 16, 9));
    }

    #[test]
    fn padding_fills_whole_blocks_with_gray() {
        let clip = vec![vec![0.0; 4]; 27];
        let padded = pad_to_blocks(&clip, 5, 5);
        assert_eq!(padded.len(), 30);
        assert_eq!(padded[29], vec![GRAY; 4]);
        assert_eq!(pad_to_blocks(&clip, 5, 1).len(), 27);
        assert_eq!(pad_to_blocks(&clip[..2], 5, 1).len(), 5);
    }
}
