//! Acceptance suite: every criterion prints one PASS or FAIL line. Soft
//! criteria print SOFT-PASS or SOFT-FAIL and never change the exit status.
//!
//! Arguments that do not start with `-` select criteria by substring.

mod common;

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use common::direct_ssim;
use hpnet::cli::{step_gradient_error, GRAD_TOLERANCE};
use hpnet::data::{extract_blocks, generate_dataset, SequenceSpec};
use hpnet::dataset;
use hpnet::metrics::{channel_means, decode_accuracy, ssim, EvalReport};
use hpnet::neurophys::{
    familiarity_suppression, prediction_suppression, texture_pool, ExposureOptions, Protocol, SuppressionResult,
    UnitKind,
};
use hpnet::parallel::Executor;
use hpnet::pgm;
use hpnet::train::AdamConfig;
use hpnet::{Checkpoint, HpnetConfig, Network, ParamStore, Scheme, Sequence, TrainOptions, Trainer};
use hpnet_tensor::{concat_channels, conv3d, grad_check, sparse_conv3d, ConvKernel3D, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;

/// Trained networks shared between criteria.
#[derive(Default)]
struct Context {
    block_to_block: Option<(HpnetConfig, ParamStore, f64, f64)>,
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_tensor(r: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| r.random_range(lo..hi)).collect()).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

// ---------------------------------------------------------------- gradients

/// Every differentiable op reduced to a scalar through a fixed random
/// weighting, so that no gradient is uniform by construction.
fn op_gradient_errors() -> Result<Vec<(&'static str, f64)>, String> {
    let mut r = rng(101);
    let x4 = random_tensor(&mut r, &[2, 3, 4, 4], -1.0, 1.0);
    let other = random_tensor(&mut r, &[2, 3, 4, 4], -1.0, 1.0);
    let mix = random_tensor(&mut r, &[2, 3, 4, 4], -1.0, 1.0);
    let kernel_w = random_tensor(&mut r, &[3, 2, 3, 3, 3], -0.5, 0.5);
    let kernel_b = random_tensor(&mut r, &[3], -0.5, 0.5);
    let out_mix = random_tensor(&mut r, &[3, 3, 4, 4], -1.0, 1.0);
    let weighted = |t: Tensor, m: &Tensor| t.hadamard(m).map(|p| p.sum());
    let eps = 1e-5;
    let mut results = Vec::new();
    let mut check = |name: &'static str, f: &dyn Fn(&Tensor) -> hpnet_tensor::Result<Tensor>, x: &Tensor| {
        grad_check(f, x, eps).map(|e| results.push((name, e)))
    };
    check("add", &|x| weighted(x.add(&other)?, &mix), &x4).map_err(err)?;
    check("sub", &|x| weighted(other.sub(x)?, &mix), &x4).map_err(err)?;
    check("hadamard", &|x| weighted(x.hadamard(&other)?, &mix), &x4).map_err(err)?;
    check("scale", &|x| weighted(x.scale(-1.7), &mix), &x4).map_err(err)?;
    check("relu", &|x| weighted(x.relu(), &mix), &x4).map_err(err)?;
    check("sigmoid", &|x| weighted(x.sigmoid(), &mix), &x4).map_err(err)?;
    check("tanh", &|x| weighted(x.tanh(), &mix), &x4).map_err(err)?;
    check("satlu", &|x| weighted(x.satlu(0.5), &mix), &x4).map_err(err)?;
    check("sum", &|x| Ok(x.hadamard(x)?.sum()), &x4).map_err(err)?;
    check("mean", &|x| Ok(x.hadamard(&mix)?.mean()), &x4).map_err(err)?;
    check("mse", &|x| x.mse(&other), &x4).map_err(err)?;
    check(
        "reshape",
        &|x| weighted(x.reshape(&[3, 2, 4, 4])?, &mix.reshape(&[3, 2, 4, 4])?),
        &x4,
    )
    .map_err(err)?;
    let concat_mix = random_tensor(&mut r, &[4, 3, 4, 4], -1.0, 1.0);
    check(
        "concat_channels",
        &|x| weighted(concat_channels(&[x, &other])?, &concat_mix),
        &x4,
    )
    .map_err(err)?;
    let slice_mix = random_tensor(&mut r, &[1, 3, 4, 4], -1.0, 1.0);
    check(
        "slice_channels",
        &|x| weighted(x.slice_channels(1, 1)?, &slice_mix),
        &x4,
    )
    .map_err(err)?;
    let pool_mix = random_tensor(&mut r, &[2, 3, 2, 2], -1.0, 1.0);
    check("maxpool_spatial", &|x| weighted(x.maxpool_spatial(2)?, &pool_mix), &x4).map_err(err)?;
    let up_in = random_tensor(&mut r, &[2, 3, 2, 2], -1.0, 1.0);
    check("upsample_spatial", &|x| weighted(x.upsample_spatial(2)?, &mix), &up_in).map_err(err)?;
    let conv_of = |x: &Tensor, w: &Tensor, b: &Tensor| -> hpnet_tensor::Result<Tensor> {
        weighted(conv3d(x, &ConvKernel3D::new(w.clone(), Some(b.clone()))?)?, &out_mix)
    };
    check("conv3d input", &|x| conv_of(x, &kernel_w, &kernel_b), &x4).map_err(err)?;
    check("conv3d weight", &|w| conv_of(&x4, w, &kernel_b), &kernel_w).map_err(err)?;
    check("conv3d bias", &|b| conv_of(&x4, &kernel_w, b), &kernel_b).map_err(err)?;
    let sparse_in = random_tensor(&mut r, &[2, 3, 4, 4], -1.0, 1.0);
    let sparse_in = Tensor::new(
        sparse_in.shape(),
        sparse_in
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| if i % 3 == 0 { v } else { 0.0 })
            .collect(),
    )
    .map_err(err)?;
    let sparse_of = |x: &Tensor, w: &Tensor| -> hpnet_tensor::Result<Tensor> {
        weighted(sparse_conv3d(x, &ConvKernel3D::new(w.clone(), None)?)?, &out_mix)
    };
    check("sparse_conv3d input", &|x| sparse_of(x, &kernel_w), &sparse_in).map_err(err)?;
    check("sparse_conv3d weight", &|w| sparse_of(&sparse_in, w), &kernel_w).map_err(err)?;
    Ok(results)
}

fn gradient_correctness(_: &mut Context) -> Outcome {
    let start = Instant::now();
    let ops = op_gradient_errors()?;
    let worst_op = ops
        .iter()
        .cloned()
        .fold(("", 0.0), |a, b| if b.1 > a.1 { b } else { a });
    let mut steps = Vec::new();
    for scheme in [Scheme::BlockToBlock, Scheme::BlockToFrame] {
        steps.push(step_gradient_error(scheme, 7, 1e-5).map_err(err)?);
    }
    let worst_step = steps
        .iter()
        .cloned()
        .fold((String::new(), 0.0), |a, b| if b.1 > a.1 { b } else { a });
    let secs = start.elapsed().as_secs_f64();
    let pass = worst_op.1 < GRAD_TOLERANCE && worst_step.1 < GRAD_TOLERANCE && secs < 120.0;
    Ok((
        pass,
        format!(
            "{} ops, worst {:.2e} ({}); step loss worst {:.2e} ({}); {secs:.0}s",
            ops.len(),
            worst_op.1,
            worst_op.0,
            worst_step.1,
            worst_step.0
        ),
    ))
}

// ------------------------------------------------------------ conv oracles

fn sparse_dense_oracle(_: &mut Context) -> Outcome {
    let start = Instant::now();
    let mut r = rng(102);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let c_in = r.random_range(1..4);
        let c_out = r.random_range(1..4);
        let shape = [c_in, r.random_range(1..6), r.random_range(1..9), r.random_range(1..9)];
        let odd = |r: &mut ChaCha8Rng| [1, 3, 5][r.random_range(0..3)];
        let k = [c_out, c_in, odd(&mut r), odd(&mut r), odd(&mut r)];
        let density = r.random_range(0.05..1.0);
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| {
                if r.random_bool(density) {
                    r.random_range(-1.0..1.0)
                } else {
                    0.0
                }
            })
            .collect();
        let x = Tensor::new(&shape, data).map_err(err)?;
        let kernel = ConvKernel3D::new(random_tensor(&mut r, &k, -1.0, 1.0), None).map_err(err)?;
        let sparse = sparse_conv3d(&x, &kernel).map_err(err)?;
        let dense = conv3d(&x, &kernel).map_err(err)?;
        worst = worst.max(max_abs_diff(sparse.data(), dense.data()));
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst < 1e-12 && secs < 60.0,
        format!("1000 instances, max |d| {worst:.2e}; {secs:.1}s"),
    ))
}

fn telescoping(_: &mut Context) -> Outcome {
    let config = HpnetConfig::new(Scheme::BlockToBlock, vec![4, 6], 16, 16).with_block_depth(2);
    let mut r = rng(103);
    let store = ParamStore::init(&config, &mut r);
    let frames: Vec<Vec<f64>> = (0..200)
        .map(|_| (0..256).map(|_| r.random_range(0.0..1.0)).collect())
        .collect();
    let blocks = extract_blocks(&frames, 16, 16, 2, 2).map_err(err)?;
    let net = Network::new(&config, &store, false).map_err(err)?;
    let last = net.trace(&blocks).map_err(err)?.pop().ok_or("no steps")?;
    let mut worst: f64 = 0.0;
    for l in 0..config.levels() {
        let w = store
            .get(&format!("level{}.feedforward.weight", l + 1))
            .ok_or("missing weight")?;
        let kernel = ConvKernel3D::new(Tensor::new(&w.shape, w.data.clone()).map_err(err)?, None).map_err(err)?;
        let direct = conv3d(&last.inputs[l], &kernel).map_err(err)?;
        worst = worst.max(max_abs_diff(last.state.levels[l].representation.data(), direct.data()));
    }
    Ok((
        worst < 1e-9,
        format!("{} steps, {} levels, drift {worst:.2e}", blocks.len(), config.levels()),
    ))
}

// ----------------------------------------------------------------- training

const TOY_FRAMES: usize = 15;

fn toy_spec(frames: usize) -> SequenceSpec {
    SequenceSpec {
        n_frames: frames,
        ..SequenceSpec::default()
    }
}

fn train_toy(scheme: Scheme) -> Result<(HpnetConfig, ParamStore, f64, f64), String> {
    let config = HpnetConfig::new(scheme, vec![8, 16], 32, 32);
    let train = generate_dataset(&toy_spec(TOY_FRAMES), 200, 11, false).map_err(err)?;
    let mut trainer = Trainer::new(config.clone(), TrainOptions::default(), 3)
        .map_err(err)?
        .with_executor(Executor::from_env().map_err(err)?);
    let history = trainer.run(&train, &[], 20, |_| {}).map_err(err)?;
    let first = history[0].train_loss;
    let last = history.last().expect("baseline row").train_loss;
    Ok((config, trainer.params().clone(), first, last))
}

fn block_to_block(ctx: &mut Context) -> Result<&(HpnetConfig, ParamStore, f64, f64), String> {
    if ctx.block_to_block.is_none() {
        ctx.block_to_block = Some(train_toy(Scheme::BlockToBlock)?);
    }
    Ok(ctx.block_to_block.as_ref().expect("just trained"))
}

fn training_descent(ctx: &mut Context) -> Outcome {
    let start = Instant::now();
    let (_, _, first, last) = *block_to_block(ctx)?;
    let secs = start.elapsed().as_secs_f64();
    Ok((
        last < 0.5 * first && secs < 1800.0,
        format!(
            "200 x {TOY_FRAMES}-frame sequences, 20 epochs: loss {first:.4} -> {last:.4} (ratio {:.3}); {secs:.0}s",
            last / first
        ),
    ))
}

/// Held-out rollouts: 10 seed frames, 10 predicted frames.
fn rollout_report(config: &HpnetConfig, params: &ParamStore) -> Result<EvalReport, String> {
    let test = generate_dataset(&toy_spec(20), 20, 999, false).map_err(err)?;
    let reports = Executor::from_env()
        .map_err(err)?
        .map(&test, |s| -> hpnet::Result<EvalReport> {
            let net = Network::new(config, params, false)?;
            let pred = net.predict_frames(&s.frames[..10], 10)?;
            EvalReport::new(&pred, &s.frames[10..], &s.frames[..10], 32, 32)
        });
    let reports = reports.into_iter().collect::<hpnet::Result<Vec<_>>>().map_err(err)?;
    EvalReport::average(&reports).map_err(err)
}

fn rollout_beats_baseline(ctx: &mut Context) -> Outcome {
    let (config, params, ..) = block_to_block(ctx)?;
    let report = rollout_report(config, params)?;
    let delta = report.mean_ssim() - report.baseline_mean_ssim();
    Ok((
        delta >= 0.02,
        format!(
            "20 held-out sequences: SSIM {:.4} vs copy-last {:.4} (delta {delta:+.4}); MSE {:.1} vs {:.1}",
            report.mean_ssim(),
            report.baseline_mean_ssim(),
            report.mean_mse(),
            report.baseline_mean_mse()
        ),
    ))
}

fn scheme_ordering(ctx: &mut Context) -> Outcome {
    let (config, params, ..) = block_to_block(ctx)?;
    let bb = rollout_report(config, params)?;
    let (ff_config, ff_params, ..) = train_toy(Scheme::FrameToFrame)?;
    let ff = rollout_report(&ff_config, &ff_params)?;
    Ok((
        bb.mean_ssim() >= ff.mean_ssim(),
        format!(
            "horizon 10, equal training budget: B-B SSIM {:.4}, F-F SSIM {:.4}",
            bb.mean_ssim(),
            ff.mean_ssim()
        ),
    ))
}

// ------------------------------------------------------------- neurophys

const NEURO_SIZE: usize = 16;

fn neuro_setup(lr: f64, epochs: usize) -> (HpnetConfig, ParamStore, ExposureOptions) {
    let config = HpnetConfig::new(Scheme::BlockToBlock, vec![8, 16], NEURO_SIZE, NEURO_SIZE);
    let params = ParamStore::init(&config, &mut rng(2));
    let options = ExposureOptions {
        epochs,
        max_seconds: 1500.0,
        train: TrainOptions {
            adam: AdamConfig {
                lr,
                ..AdamConfig::default()
            },
            ..TrainOptions::default()
        },
        seed: 3,
    };
    (config, params, options)
}

fn format_indices(result: &SuppressionResult) -> String {
    let row = |rows: &[hpnet::neurophys::LevelIndices]| {
        rows.iter()
            .map(|r| {
                let v: Vec<String> = UnitKind::ALL.iter().map(|&k| format!("{k}{:+.3}", r.get(k))).collect();
                format!("L{} {}", r.level, v.join(" "))
            })
            .collect::<Vec<_>>()
            .join(", ")
    };
    format!(
        "pre [{}] post [{}]; {} exposure epochs",
        row(&result.pre),
        row(&result.post),
        result.history.len() - 1
    )
}

fn prediction_suppression_criterion(_: &mut Context) -> Outcome {
    let (config, params, options) = neuro_setup(0.01, 600);
    let pool = texture_pool(8, NEURO_SIZE, NEURO_SIZE, 5);
    let result = prediction_suppression(&config, &params, &Protocol::default(), &pool, 4, 1, &options).map_err(err)?;
    let pre_flat = result.pre.iter().all(|r| r.values.iter().all(|v| v.abs() < 0.05));
    let post_ok = result
        .post
        .iter()
        .all(|r| r.get(UnitKind::E) > 0.1 && r.get(UnitKind::P) > 0.0 && r.get(UnitKind::R) > 0.0);
    Ok((pre_flat && post_ok, format_indices(&result)))
}

fn familiarity_suppression_criterion(_: &mut Context) -> Outcome {
    let (config, params, options) = neuro_setup(0.01, 400);
    let per_set = 8;
    let pool = texture_pool(2 * per_set, NEURO_SIZE, NEURO_SIZE, 5);
    let result =
        familiarity_suppression(&config, &params, &Protocol::default(), &pool, per_set, 5, 1, &options).map_err(err)?;
    // Top and second modules are the only two of a two-level network.
    let pass = result.post.iter().all(|r| r.values.iter().all(|&v| v > 0.1));
    Ok((pass, format_indices(&result)))
}

// ----------------------------------------------------------------- decoding

fn decoding_depth_trend(_: &mut Context) -> Outcome {
    let config = HpnetConfig::new(Scheme::BlockToBlock, vec![8, 16, 32], 32, 32);
    let train = generate_dataset(&toy_spec(TOY_FRAMES), 120, 100, true).map_err(err)?;
    let test = generate_dataset(&toy_spec(TOY_FRAMES), 120, 200, true).map_err(err)?;
    let mut trainer = Trainer::new(config.clone(), TrainOptions::default(), 1)
        .map_err(err)?
        .with_executor(Executor::from_env().map_err(err)?);
    trainer.run(&train, &[], 10, |_| {}).map_err(err)?;
    let net = Network::new(&config, trainer.params(), false).map_err(err)?;
    let mut features: Vec<Vec<Vec<f64>>> = vec![Vec::new(); config.levels()];
    for s in &test {
        let steps = net
            .trace(&s.blocks(config.block_depth, config.block_stride).map_err(err)?)
            .map_err(err)?;
        for (l, level_features) in features.iter_mut().enumerate() {
            let mut mean = vec![0.0; config.channels[l]];
            for step in &steps {
                for (m, v) in mean.iter_mut().zip(channel_means(&step.state.levels[l].representation)) {
                    *m += v / steps.len() as f64;
                }
            }
            level_features.push(mean);
        }
    }
    let labels: Vec<usize> = test.iter().map(|s| usize::from(s.label.label())).collect();
    let accuracy = |f: &[Vec<f64>]| -> Result<f64, String> {
        let splits = 5;
        let mut total = 0.0;
        for seed in 0..splits {
            total += decode_accuracy(f, &labels, seed).map_err(err)?;
        }
        Ok(total / splits as f64)
    };
    let acc: Vec<f64> = features.iter().map(|f| accuracy(f)).collect::<Result<_, _>>()?;
    let chance = 1.0 / 6.0;
    Ok((
        acc[2] >= acc[0] && acc[0] >= chance + 0.05,
        format!(
            "accuracy by level {:.3} / {:.3} / {:.3} (chance {chance:.3}), mean of 5 splits",
            acc[0], acc[1], acc[2]
        ),
    ))
}

// ----------------------------------------------- determinism and formats

fn hpnet_cli(args: &[&str], dir: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_hpnet"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(err)?;
    if !out.status.success() {
        return Err(format!(
            "hpnet {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(())
}

fn determinism(_: &mut Context) -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let p = dir.path();
    let base = [
        "--n",
        "6",
        "--frames",
        "10",
        "--frame-size",
        "16x16",
        "--channels",
        "4,4",
        "--seed",
        "8",
        "--batch-size",
        "2",
    ];
    let train = |extra: &[&str]| {
        let mut args = vec!["train"];
        args.extend(base);
        args.extend(extra);
        hpnet_cli(&args, p)
    };
    train(&["--epochs", "10", "--out", "a"])?;
    train(&["--epochs", "10", "--out", "b"])?;
    train(&["--epochs", "5", "--out", "half"])?;
    train(&["--epochs", "5", "--resume", "half/checkpoint.hpnc", "--out", "resumed"])?;
    let read = |d: &str| std::fs::read(p.join(d).join("checkpoint.hpnc")).map_err(err);
    let (a, b, resumed) = (read("a")?, read("b")?, read("resumed")?);
    Ok((
        a == b && a == resumed,
        format!(
            "repeat run identical: {}; 5+5 resumed equals 10 continuous: {} ({} bytes)",
            a == b,
            a == resumed,
            a.len()
        ),
    ))
}

fn format_round_trips(_: &mut Context) -> Outcome {
    let sequences: Vec<Sequence> = generate_dataset(&toy_spec(8), 6, 21, true).map_err(err)?;
    let bytes = dataset::encode(&sequences).map_err(err)?;
    let decoded = dataset::decode(&bytes).map_err(err)?;
    let hpnd = dataset::encode(&decoded).map_err(err)? == bytes && decoded.len() == sequences.len();

    let config = HpnetConfig::new(Scheme::BlockToBlock, vec![2, 3], 16, 16).with_block_depth(2);
    let mut trainer = Trainer::new(config, TrainOptions::default(), 4).map_err(err)?;
    let small = generate_dataset(
        &SequenceSpec {
            height: 16,
            width: 16,
            n_frames: 4,
            size_range: (3, 5),
            ..SequenceSpec::default()
        },
        2,
        5,
        false,
    )
    .map_err(err)?;
    trainer.run(&small, &[], 1, |_| {}).map_err(err)?;
    let ck = trainer.checkpoint().encode().map_err(err)?;
    let hpnc = Checkpoint::decode(&ck).map_err(err)?.encode().map_err(err)? == ck;

    let mut r = rng(104);
    let pixels: Vec<f64> = (0..32 * 24).map(|_| r.random_range(-0.1..1.1)).collect();
    let encoded = pgm::encode(24, 32, &pixels).map_err(err)?;
    let frame = pgm::decode(&encoded).map_err(err)?;
    let grid: Vec<f64> = pixels
        .iter()
        .map(|&v| dataset::dequantize(dataset::quantize(v)))
        .collect();
    let pgm_ok = frame.pixels == grid && pgm::encode(24, 32, &frame.pixels).map_err(err)? == encoded;
    Ok((
        hpnd && hpnc && pgm_ok,
        format!("HPND bit-exact: {hpnd}; HPNC bit-exact: {hpnc}; PGM quantization-exact: {pgm_ok}"),
    ))
}

fn ssim_axioms(_: &mut Context) -> Outcome {
    let mut r = rng(105);
    let (mut self_err, mut sym_err, mut oracle_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..20 {
        let (h, w) = (r.random_range(11..33), r.random_range(11..33));
        let x: Vec<f64> = (0..h * w).map(|_| r.random_range(0.0..1.0)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| (v + r.random_range(-0.3..0.3)).clamp(0.0, 1.0))
            .collect();
        let xy = ssim(&x, &y, h, w).map_err(err)?;
        self_err = self_err.max((ssim(&x, &x, h, w).map_err(err)? - 1.0).abs());
        sym_err = sym_err.max((xy - ssim(&y, &x, h, w).map_err(err)?).abs());
        oracle_err = oracle_err.max((xy - direct_ssim(&x, &y, h, w)).abs());
    }
    Ok((
        self_err <= 1e-9 && sym_err <= 1e-12 && oracle_err <= 1e-9,
        format!("20 random pairs: |ssim(x,x)-1| {self_err:.1e}, asymmetry {sym_err:.1e}, oracle gap {oracle_err:.1e}"),
    ))
}

// -------------------------------------------------------------------- main

type Run = fn(&mut Context) -> Outcome;

const CRITERIA: [(&str, bool, Run); 12] = [
    ("gradient correctness", true, gradient_correctness),
    ("sparse/dense oracle", true, sparse_dense_oracle),
    ("delta-accumulation telescoping", true, telescoping),
    ("format round-trips", true, format_round_trips),
    ("SSIM axioms", true, ssim_axioms),
    ("determinism", true, determinism),
    ("training descent", true, training_descent),
    ("rollout beats baseline", true, rollout_beats_baseline),
    ("scheme ordering", false, scheme_ordering),
    ("prediction suppression", true, prediction_suppression_criterion),
    ("familiarity suppression", true, familiarity_suppression_criterion),
    ("decoding depth trend", true, decoding_depth_trend),
];

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut ctx = Context::default();
    let mut gated_failures = 0;
    let mut ran = 0;
    for (name, gated, run) in CRITERIA {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let (pass, detail) = match run(&mut ctx) {
            Ok(outcome) => outcome,
            Err(e) => (false, format!("error: {e}")),
        };
        let tag = match (gated, pass) {
            (true, true) => "PASS",
            (true, false) => "FAIL",
            (false, true) => "SOFT-PASS",
            (false, false) => "SOFT-FAIL",
        };
        if gated && !pass {
            gated_failures += 1;
        }
        println!("{tag} {name}: {detail} [{:.0}s]", start.elapsed().as_secs_f64());
    }
    println!("acceptance: {ran} criteria run, {gated_failures} gated failures");
    if gated_failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
