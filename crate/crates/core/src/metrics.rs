//! Frame quality measures, the copy-last-frame baseline and the
//! nearest-centroid decoding probe.

use std::fmt::Write as _;

use hpnet_tensor::Tensor;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{HpnetError, Result};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

fn check_pair(pred: &[f64], target: &[f64], what: &str) -> Result<()> {
    if pred.len() != target.len() {
        return Err(hpnet_tensor::TensorError::Dimension {
            op: "metric",
            lhs: vec![pred.len()],
            rhs: vec![target.len()],
        }
        .into());
    }
    if pred.is_empty() {
        return Err(HpnetError::contract(format!("{what} of an empty frame")));
    }
    Ok(())
}

/// Mean squared difference of one frame on the 0-255 scale.
pub fn frame_mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_pair(pred, target, "mse")?;
    let sum: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = 255.0 * (p - t);
            d * d
        })
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Per-frame [`frame_mse`].
pub fn mse(pred: &[Vec<f64>], target: &[Vec<f64>]) -> Result<Vec<f64>> {
    if pred.len() != target.len() {
        return Err(HpnetError::contract(format!(
            "{} predicted frames for {} targets",
            pred.len(),
            target.len()
        )));
    }
    pred.iter().zip(target).map(|(p, t)| frame_mse(p, t)).collect()
}

/// Normalized 1D Gaussian taps; the 2D window is their outer product.
fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let mut taps = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, t) in taps.iter_mut().enumerate() {
        let x = i as f64 - c;
        *t = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    taps
}

/// Separable "valid" Gaussian filter of an `h`×`w` image.
fn filter_valid(img: &[f64], h: usize, w: usize, taps: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (oh, ow) = (h + 1 - SSIM_WINDOW, w + 1 - SSIM_WINDOW);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().zip(&img[y * w + x..]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps.iter().enumerate().map(|(i, t)| t * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Single-scale SSIM with an 11×11 Gaussian window (sigma 1.5) and dynamic
/// range 1, averaged over every fully contained window position.
pub fn ssim(pred: &[f64], target: &[f64], height: usize, width: usize) -> Result<f64> {
    check_pair(pred, target, "ssim")?;
    if pred.len() != height * width {
        return Err(HpnetError::contract(format!(
            "frame of {} pixels is not {height}x{width}",
            pred.len()
        )));
    }
    if height < SSIM_WINDOW || width < SSIM_WINDOW {
        return Err(HpnetError::contract(format!(
            "{height}x{width} frame is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )));
    }
    let taps = gaussian_taps();
    let product = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x * y).collect() };
    let mu_x = filter_valid(pred, height, width, &taps);
    let mu_y = filter_valid(target, height, width, &taps);
    let xx = filter_valid(&product(pred, pred), height, width, &taps);
    let yy = filter_valid(&product(target, target), height, width, &taps);
    let xy = filter_valid(&product(pred, target), height, width, &taps);
    let (c1, c2) = (K1 * K1, K2 * K2);
    let mut total = 0.0;
    for i in 0..mu_x.len() {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let vx = xx[i] - mx * mx;
        let vy = yy[i] - my * my;
        let cov = xy[i] - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    Ok(total / mu_x.len() as f64)
}

/// Per-frame [`ssim`].
pub fn ssim_frames(pred: &[Vec<f64>], target: &[Vec<f64>], height: usize, width: usize) -> Result<Vec<f64>> {
    if pred.len() != target.len() {
        return Err(HpnetError::contract(format!(
            "{} predicted frames for {} targets",
            pred.len(),
            target.len()
        )));
    }
    pred.iter()
        .zip(target)
        .map(|(p, t)| ssim(p, t, height, width))
        .collect()
}

/// The last seed frame repeated `horizon` times.
pub fn copy_last_baseline(seed_frames: &[Vec<f64>], horizon: usize) -> Result<Vec<Vec<f64>>> {
    let last = seed_frames
        .last()
        .ok_or_else(|| HpnetError::contract("copy-last baseline needs a seed frame"))?;
    Ok(vec![last.clone(); horizon])
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Per-frame quality of a prediction, alongside the copy-last baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mse: Vec<f64>,
    pub ssim: Vec<f64>,
    pub baseline_mse: Vec<f64>,
    pub baseline_ssim: Vec<f64>,
}

pub const EVAL_HEADER: &str = "# hpnet-eval v1";

impl EvalReport {
    /// Scores `pred` and the copy-last baseline built from `seed_frames`
    /// against `target`.
    pub fn new(
        pred: &[Vec<f64>],
        target: &[Vec<f64>],
        seed_frames: &[Vec<f64>],
        height: usize,
        width: usize,
    ) -> Result<Self> {
        let baseline = copy_last_baseline(seed_frames, target.len())?;
        Ok(EvalReport {
            mse: mse(pred, target)?,
            ssim: ssim_frames(pred, target, height, width)?,
            baseline_mse: mse(&baseline, target)?,
            baseline_ssim: ssim_frames(&baseline, target, height, width)?,
        })
    }

    /// Frame-wise mean of several equally long reports.
    pub fn average(reports: &[EvalReport]) -> Result<Self> {
        let first = reports
            .first()
            .ok_or_else(|| HpnetError::contract("no reports to average"))?;
        let n = first.mse.len();
        if reports.iter().any(|r| r.mse.len() != n) {
            return Err(HpnetError::contract("reports cover different horizons"));
        }
        let avg = |f: fn(&EvalReport) -> &Vec<f64>| -> Vec<f64> {
            (0..n)
                .map(|i| reports.iter().map(|r| f(r)[i]).sum::<f64>() / reports.len() as f64)
                .collect()
        };
        Ok(EvalReport {
            mse: avg(|r| &r.mse),
            ssim: avg(|r| &r.ssim),
            baseline_mse: avg(|r| &r.baseline_mse),
            baseline_ssim: avg(|r| &r.baseline_ssim),
        })
    }

    pub fn mean_mse(&self) -> f64 {
        mean(&self.mse)
    }

    pub fn mean_ssim(&self) -> f64 {
        mean(&self.ssim)
    }

    pub fn baseline_mean_mse(&self) -> f64 {
        mean(&self.baseline_mse)
    }

    pub fn baseline_mean_ssim(&self) -> f64 {
        mean(&self.baseline_ssim)
    }

    /// Tab-separated `frame_idx mse ssim` rows; aggregates and baseline
    /// deltas follow as comment lines.
    pub fn to_text(&self) -> String {
        let mut s = format!("{EVAL_HEADER}\n");
        for (i, (m, q)) in self.mse.iter().zip(&self.ssim).enumerate() {
            let _ = writeln!(s, "{i}\t{m}\t{q}");
        }
        let _ = writeln!(s, "# mean_mse\t{}", self.mean_mse());
        let _ = writeln!(s, "# mean_ssim\t{}", self.mean_ssim());
        let _ = writeln!(s, "# baseline_mean_mse\t{}", self.baseline_mean_mse());
        let _ = writeln!(s, "# baseline_mean_ssim\t{}", self.baseline_mean_ssim());
        let _ = writeln!(s, "# delta_mse\t{}", self.mean_mse() - self.baseline_mean_mse());
        let _ = writeln!(s, "# delta_ssim\t{}", self.mean_ssim() - self.baseline_mean_ssim());
        s
    }
}

/// Spatio-temporal average of every channel of a `[c, d, h, w]` tensor.
pub fn channel_means(t: &Tensor) -> Vec<f64> {
    let c = t.shape()[0];
    let inner = t.len() / c;
    t.data()
        .chunks_exact(inner)
        .map(|ch| ch.iter().sum::<f64>() / inner as f64)
        .collect()
}

/// Test accuracy of a nearest-class-centroid classifier on a seeded,
/// per-class 80/20 split of `features`.
///
/// Every class keeps at least one training and one test sample. Ties go to
/// the lowest label.
pub fn decode_accuracy(features: &[Vec<f64>], labels: &[usize], split_seed: u64) -> Result<f64> {
    if features.len() != labels.len() {
        return Err(HpnetError::contract(format!(
            "{} feature vectors for {} labels",
            features.len(),
            labels.len()
        )));
    }
    let dim = features.first().map_or(0, Vec::len);
    if dim == 0 || features.iter().any(|f| f.len() != dim) {
        return Err(HpnetError::contract(
            "feature vectors must be non-empty and equally long",
        ));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    let present: Vec<usize> = (0..n_classes).filter(|&c| !members[c].is_empty()).collect();
    if present.len() < 2 {
        return Err(HpnetError::contract("decoding needs at least two classes"));
    }
    if let Some(&c) = present.iter().find(|&&c| members[c].len() < 2) {
        return Err(HpnetError::contract(format!("class {c} has fewer than two samples")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for &c in &present {
        let mut idx = members[c].clone();
        idx.shuffle(&mut rng);
        let n_test = ((idx.len() as f64 * 0.2).round() as usize).clamp(1, idx.len() - 1);
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    let mut centroids = vec![vec![0.0; dim]; n_classes];
    let mut counts = vec![0usize; n_classes];
    for &i in &train {
        counts[labels[i]] += 1;
        centroids[labels[i]]
            .iter_mut()
            .zip(&features[i])
            .for_each(|(c, f)| *c += f);
    }
    for (c, n) in centroids.iter_mut().zip(&counts) {
        if *n > 0 {
            c.iter_mut().for_each(|v| *v /= *n as f64);
        }
    }
    let correct = test
        .iter()
        .filter(|&&i| {
            let mut best = (f64::INFINITY, usize::MAX);
            for &c in &present {
                let d: f64 = centroids[c]
                    .iter()
                    .zip(&features[i])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if d < best.0 {
                    best = (d, c);
                }
            }
            best.1 == labels[i]
        })
        .count();
    Ok(correct as f64 / test.len() as f64)
}
