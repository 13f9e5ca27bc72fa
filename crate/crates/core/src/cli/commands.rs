use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{EvalArgs, GenDataArgs, NetArgs, NeurophysArgs, PredictArgs, RunConfig, TrainArgs};
use crate::config::{parse_frame_size, HpnetConfig};
use crate::data::{generate_dataset, MovementClass, Sequence, SequenceSpec};
use crate::dataset::{read_dataset, write_dataset};
use crate::error::{HpnetError, Result};
use crate::metrics::EvalReport;
use crate::model::Network;
use crate::neurophys::{
    familiarity_suppression, prediction_suppression, texture_pool, traces_to_text, ExposureOptions, Protocol,
    SuppressionResult, UnitKind,
};
use crate::parallel::Executor;
use crate::pgm;
use crate::train::{Checkpoint, TrainRecord, Trainer};

pub const CHECKPOINT_FILE: &str = "checkpoint.hpnc";
pub const TRAIN_LOG_FILE: &str = "train_log.tsv";
pub const EVAL_FILE: &str = "eval.tsv";

fn run_config(net: &NetArgs) -> Result<RunConfig> {
    let mut rc = match &net.config {
        Some(path) => RunConfig::from_text(&fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    let overrides = [
        ("seed", net.seed.map(|v| v.to_string())),
        ("scheme", net.scheme.clone()),
        ("levels", net.levels.map(|v| v.to_string())),
        ("channels", net.channels.clone()),
        ("block_depth", net.block_depth.map(|v| v.to_string())),
        ("frame_size", net.frame_size.clone()),
        ("epochs", net.epochs.map(|v| v.to_string())),
        ("lr", net.lr.map(|v| v.to_string())),
        ("batch_size", net.batch_size.map(|v| v.to_string())),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            rc.set(key, &v)?;
        }
    }
    Ok(rc)
}

fn sequence_spec(config: &HpnetConfig, frames: usize) -> SequenceSpec {
    SequenceSpec {
        height: config.frame_height,
        width: config.frame_width,
        n_frames: frames,
        ..SequenceSpec::default()
    }
}

pub fn gen_data(a: &GenDataArgs) -> Result<()> {
    let (height, width) = parse_frame_size(&a.frame_size)?;
    let mixed = a.motion == "mixed";
    let motion = if mixed {
        MovementClass::Diagonal
    } else {
        a.motion.parse()?
    };
    let spec = SequenceSpec {
        height,
        width,
        n_frames: a.frames,
        n_objects: a.objects,
        max_speed: a.max_speed,
        motion,
        ..SequenceSpec::default()
    };
    let sequences = generate_dataset(&spec, a.n, a.seed, mixed)?;
    write_dataset(&a.out, &sequences)?;
    println!("wrote {} sequences to {}", sequences.len(), a.out.display());
    Ok(())
}

fn check_frames(config: &HpnetConfig, sequences: &[Sequence], what: &str) -> Result<()> {
    if let Some(s) = sequences
        .iter()
        .find(|s| (s.height, s.width) != (config.frame_height, config.frame_width))
    {
        return Err(HpnetError::config(
            "frame_size",
            format!(
                "{what} has {}x{} frames, network expects {}x{}",
                s.height, s.width, config.frame_height, config.frame_width
            ),
        ));
    }
    Ok(())
}

fn log_line(r: &TrainRecord) -> String {
    let val = r.val_loss.map_or_else(|| "-".to_string(), |v| v.to_string());
    format!("{}\t{}\t{}\t{:.3}", r.epoch, r.train_loss, val, r.seconds)
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let rc = run_config(&a.net)?;
    let options = rc.train_options()?;
    let mut trainer = match &a.resume {
        Some(path) => Trainer::resume(Checkpoint::load(path)?, options)?,
        None => Trainer::new(rc.network()?, options, rc.seed)?,
    };
    let config = trainer.config().clone();
    let data_path = a.data.as_ref().or(rc.data.as_ref());
    let train = match data_path {
        Some(p) => read_dataset(p)?,
        None => generate_dataset(&sequence_spec(&config, a.frames), a.n, rc.seed, false)?,
    };
    check_frames(&config, &train, "training data")?;
    let val = match a.val_data.as_ref().or(rc.val_data.as_ref()) {
        Some(p) => read_dataset(p)?,
        None => Vec::new(),
    };
    check_frames(&config, &val, "validation data")?;
    let out = a.out.clone().unwrap_or_else(|| rc.out.clone());
    fs::create_dir_all(&out)?;
    trainer = trainer.with_executor(Executor::from_env()?);
    println!("epoch\ttrain_loss\tval_loss\tseconds");
    let history = trainer.run(&train, &val, rc.epochs, |r| println!("{}", log_line(r)))?;
    let mut log = String::from("# hpnet-train v1\nepoch\ttrain_loss\tval_loss\tseconds\n");
    for r in &history {
        let _ = writeln!(log, "{}", log_line(r));
    }
    fs::write(out.join(TRAIN_LOG_FILE), log)?;
    trainer.checkpoint().save(out.join(CHECKPOINT_FILE))?;
    println!("checkpoint written to {}", out.join(CHECKPOINT_FILE).display());
    Ok(())
}

/// Sequences for predict/eval: a dataset file or freshly generated clips
/// long enough for the seed frames plus the horizon.
fn eval_sequences(
    config: &HpnetConfig,
    data: Option<&Path>,
    n: usize,
    seed: u64,
    frames: usize,
) -> Result<Vec<Sequence>> {
    let sequences = match data {
        Some(p) => read_dataset(p)?,
        None => generate_dataset(&sequence_spec(config, frames), n, seed, false)?,
    };
    check_frames(config, &sequences, "dataset")?;
    Ok(sequences)
}

fn write_frames(dir: &Path, prefix: &str, frames: &[Vec<f64>], h: usize, w: usize) -> Result<()> {
    for (i, f) in frames.iter().enumerate() {
        pgm::write(dir.join(format!("{prefix}_{i:03}.pgm")), h, w, f)?;
    }
    Ok(())
}

pub fn predict(a: &PredictArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let config = ck.config.clone();
    let sequences = eval_sequences(
        &config,
        a.data.as_deref(),
        a.index + 1,
        a.seed,
        (a.seed_frames + a.horizon).max(config.block_depth),
    )?;
    let seq = sequences
        .get(a.index)
        .ok_or_else(|| HpnetError::config("index", format!("dataset has {} sequences", sequences.len())))?;
    if a.seed_frames == 0 || a.seed_frames > seq.n_frames() {
        return Err(HpnetError::config(
            "seed_frames",
            format!("need 1..={} seed frames", seq.n_frames()),
        ));
    }
    let net = Network::new(&config, &ck.params, false)?;
    let seeds = &seq.frames[..a.seed_frames];
    let pred = net.predict_frames(seeds, a.horizon)?;
    let truth_end = (a.seed_frames + a.horizon).min(seq.n_frames());
    let truth = &seq.frames[a.seed_frames..truth_end];
    fs::create_dir_all(&a.out)?;
    let (h, w) = (config.frame_height, config.frame_width);
    write_frames(&a.out, "seed", seeds, h, w)?;
    write_frames(&a.out, "pred", &pred, h, w)?;
    write_frames(&a.out, "gt", truth, h, w)?;
    println!(
        "wrote {} seed, {} predicted and {} ground-truth frames to {}",
        seeds.len(),
        pred.len(),
        truth.len(),
        a.out.display()
    );
    Ok(())
}

fn read_frame_series(dir: &Path, prefix: &str) -> Result<(Vec<Vec<f64>>, usize, usize)> {
    let mut frames = Vec::new();
    let mut size = (0, 0);
    loop {
        let path = dir.join(format!("{prefix}_{:03}.pgm", frames.len()));
        if !path.exists() {
            break;
        }
        let f = pgm::read(&path)?;
        if !frames.is_empty() && size != (f.height, f.width) {
            return Err(HpnetError::contract(format!("{} differs in size", path.display())));
        }
        size = (f.height, f.width);
        frames.push(f.pixels);
    }
    Ok((frames, size.0, size.1))
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let report = if let Some(dir) = &a.pred_dir {
        let (seeds, ..) = read_frame_series(dir, "seed")?;
        let (pred, h, w) = read_frame_series(dir, "pred")?;
        let (truth, ..) = read_frame_series(dir, "gt")?;
        if pred.is_empty() || pred.len() != truth.len() {
            return Err(HpnetError::contract(format!(
                "{} predicted and {} ground-truth frames in {}",
                pred.len(),
                truth.len(),
                dir.display()
            )));
        }
        let seeds = if seeds.is_empty() { truth[..1].to_vec() } else { seeds };
        EvalReport::new(&pred, &truth, &seeds, h, w)?
    } else {
        let path = a
            .checkpoint
            .as_ref()
            .ok_or_else(|| HpnetError::config("checkpoint", "eval needs --checkpoint or --pred-dir"))?;
        let ck = Checkpoint::load(path)?;
        let config = ck.config.clone();
        let total = a.seed_frames + a.horizon;
        let sequences = eval_sequences(&config, a.data.as_deref(), a.n, a.seed, total)?;
        if sequences.is_empty() {
            return Err(HpnetError::contract("no sequences to evaluate"));
        }
        if a.horizon == 0 || a.seed_frames == 0 {
            return Err(HpnetError::config(
                "horizon",
                "seed frames and horizon must be positive",
            ));
        }
        if let Some(s) = sequences.iter().find(|s| s.n_frames() < total) {
            return Err(HpnetError::config(
                "horizon",
                format!("a sequence has {} frames, {total} needed", s.n_frames()),
            ));
        }
        let executor = Executor::from_env()?;
        let (h, w) = (config.frame_height, config.frame_width);
        let reports = executor.map(&sequences, |s| -> Result<EvalReport> {
            let net = Network::new(&config, &ck.params, false)?;
            let seeds = &s.frames[..a.seed_frames];
            let pred = net.predict_frames(seeds, a.horizon)?;
            EvalReport::new(&pred, &s.frames[a.seed_frames..total], seeds, h, w)
        });
        let reports = reports.into_iter().collect::<Result<Vec<_>>>()?;
        EvalReport::average(&reports)?
    };
    fs::create_dir_all(&a.out)?;
    fs::write(a.out.join(EVAL_FILE), report.to_text())?;
    println!(
        "mean ssim {:.4} (copy-last {:.4}), mean mse {:.2} (copy-last {:.2})",
        report.mean_ssim(),
        report.baseline_mean_ssim(),
        report.mean_mse(),
        report.baseline_mean_mse()
    );
    Ok(())
}

fn print_indices(name: &str, r: &SuppressionResult) {
    println!("{name}: window frames {}..{}", r.window.start, r.window.end);
    println!("level\tphase\tE\tP\tR");
    for (phase, rows) in [("pre", &r.pre), ("post", &r.post)] {
        for row in rows {
            println!(
                "{}\t{phase}\t{:+.4}\t{:+.4}\t{:+.4}",
                row.level,
                row.get(UnitKind::E),
                row.get(UnitKind::P),
                row.get(UnitKind::R)
            );
        }
    }
}

pub fn neurophys(a: &NeurophysArgs) -> Result<()> {
    let rc = run_config(&a.net)?;
    let (config, params) = match &a.checkpoint {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            (ck.config, ck.params)
        }
        None => {
            let config = rc.network()?;
            let params = Trainer::new(config.clone(), rc.train_options()?, rc.seed)?
                .params()
                .clone();
            (config, params)
        }
    };
    let options = ExposureOptions {
        epochs: rc.epochs,
        max_seconds: a.max_seconds,
        train: rc.train_options()?,
        seed: rc.seed,
    };
    let protocol = Protocol::default();
    let (h, w) = (config.frame_height, config.frame_width);
    let pool = texture_pool((2 * a.pairs).max(2 * a.set_size), h, w, rc.seed);
    fs::create_dir_all(&a.out)?;
    let paired = prediction_suppression(&config, &params, &protocol, &pool, a.pairs, rc.seed, &options)?;
    fs::write(a.out.join("prediction_traces.tsv"), traces_to_text(&paired.traces))?;
    print_indices("prediction suppression", &paired);
    let familiar = familiarity_suppression(&config, &params, &protocol, &pool, a.set_size, 5, rc.seed, &options)?;
    fs::write(a.out.join("familiarity_traces.tsv"), traces_to_text(&familiar.traces))?;
    print_indices("familiarity suppression", &familiar);
    Ok(())
}
