use std::process::ExitCode;

use hpnet_tensor::{conv3d, sparse_conv3d, ConvKernel3D, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{HpnetConfig, Scheme};
use crate::data::{extract_blocks, generate_dataset, SequenceSpec};
use crate::dataset;
use crate::error::{HpnetError, Result};
use crate::metrics::ssim;
use crate::model::{step_grad_check, Network};
use crate::params::ParamStore;
use crate::pgm;
use crate::train::{Checkpoint, TrainOptions, Trainer};

/// Largest relative gradient error accepted against central differences.
pub const GRAD_TOLERANCE: f64 = 1e-4;
const EXACT: f64 = 1e-9;

/// Result of one named check; `Err` carries the reason it failed.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub result: std::result::Result<String, String>,
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Result<Tensor> {
    let n = shape.iter().product();
    Ok(Tensor::new(
        shape,
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )?)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn tiny_config(scheme: Scheme) -> HpnetConfig {
    let depth = if scheme == Scheme::FrameToFrame { 1 } else { 2 };
    HpnetConfig::new(scheme, vec![2, 3], 8, 8).with_block_depth(depth)
}

/// Worst gradient error of one step's loss on a 2-level 8x8 network, taken
/// from the state left by a few warm-up steps.
pub fn step_gradient_error(scheme: Scheme, seed: u64, eps: f64) -> Result<(String, f64)> {
    let config = tiny_config(scheme);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let store = ParamStore::init(&config, &mut rng);
    // Dense noise keeps rectifiers and pooling away from their kinks,
    // where central differences are not a valid reference.
    let frames: Vec<Vec<f64>> = (0..5)
        .map(|_| (0..64).map(|_| rng.random_range(0.05..0.95)).collect())
        .collect();
    let blocks = extract_blocks(&frames, 8, 8, config.block_depth, config.block_stride)?;
    let (last, warm_up) = blocks.split_last().expect("five frames give blocks");
    let net = Network::new(&config, &store, false)?;
    let state = match net.trace(warm_up)?.pop() {
        Some(step) => step.state,
        None => net.initial_state(),
    };
    let worst = step_grad_check(&config, &store, &state, last, eps)?
        .into_iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("networks have parameters");
    Ok((format!("{scheme} {}", worst.0), worst.1))
}

fn check_gradients() -> Result<String> {
    let mut worst = (String::new(), 0.0);
    for scheme in [Scheme::BlockToBlock, Scheme::BlockToFrame, Scheme::FrameToFrame] {
        let found = step_gradient_error(scheme, 7, 1e-5)?;
        if found.1 >= worst.1 {
            worst = found;
        }
    }
    if worst.1 >= GRAD_TOLERANCE {
        return Err(HpnetError::Undefined(format!(
            "{} relative error {:.2e}",
            worst.0, worst.1
        )));
    }
    Ok(format!("worst relative error {:.2e} ({})", worst.1, worst.0))
}

fn check_sparse_dense() -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (c_in, c_out) = (rng.random_range(1..4), rng.random_range(1..4));
        let shape = [
            c_in,
            rng.random_range(1..5),
            rng.random_range(2..7),
            rng.random_range(2..7),
        ];
        let weight = random_tensor(&mut rng, &[c_out, c_in, 3, 3, 3])?;
        let bias = random_tensor(&mut rng, &[c_out])?;
        let kernel = ConvKernel3D::new(weight, Some(bias))?;
        let prev = random_tensor(&mut rng, &shape)?;
        let next = random_tensor(&mut rng, &shape)?;
        let sparse = sparse_conv3d(&next.sub(&prev)?, &kernel)?;
        let dense = conv3d(&next, &kernel)?.sub(&conv3d(&prev, &kernel)?)?;
        worst = worst.max(max_diff(sparse.data(), dense.data()));
    }
    if worst > EXACT {
        return Err(HpnetError::Undefined(format!("max difference {worst:.2e}")));
    }
    Ok(format!("50 geometries, max difference {worst:.2e}"))
}

fn check_telescoping() -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let shape = [2, 3, 6, 6];
    let kernel = ConvKernel3D::new(random_tensor(&mut rng, &[3, 2, 3, 3, 3])?, None)?;
    let first = random_tensor(&mut rng, &shape)?;
    let mut prev = first.clone();
    let mut acc = conv3d(&first, &kernel)?;
    for _ in 0..100 {
        let next = random_tensor(&mut rng, &shape)?;
        acc = acc.add(&sparse_conv3d(&next.sub(&prev)?, &kernel)?)?;
        prev = next;
    }
    let dense = conv3d(&prev, &kernel)?;
    let diff = max_diff(acc.data(), dense.data());
    if diff > EXACT {
        return Err(HpnetError::Undefined(format!("drift {diff:.2e} after 100 steps")));
    }
    Ok(format!("drift {diff:.2e} after 100 steps"))
}

fn check_ssim() -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (h, w) = (16, 16);
    let a: Vec<f64> = (0..h * w).map(|_| rng.random::<f64>()).collect();
    let b: Vec<f64> = (0..h * w).map(|_| rng.random::<f64>()).collect();
    let same = ssim(&a, &a, h, w)?;
    let ab = ssim(&a, &b, h, w)?;
    let ba = ssim(&b, &a, h, w)?;
    if (same - 1.0).abs() > EXACT || (ab - ba).abs() > EXACT || !(-1.0..=1.0).contains(&ab) {
        return Err(HpnetError::Undefined(format!(
            "ssim(a,a)={same} ssim(a,b)={ab} ssim(b,a)={ba}"
        )));
    }
    Ok(format!("identity {same:.6}, symmetric, bounded ({ab:.4})"))
}

fn check_formats() -> Result<String> {
    let spec = SequenceSpec {
        n_frames: 6,
        ..SequenceSpec::default()
    };
    let data = generate_dataset(&spec, 3, 9, true)?;
    if dataset::decode(&dataset::encode(&data)?)? != data {
        return Err(HpnetError::contract("dataset round trip changed the sequences"));
    }
    let trainer = Trainer::new(tiny_config(Scheme::BlockToBlock), TrainOptions::default(), 7)?;
    let ck = trainer.checkpoint();
    let bytes = ck.encode()?;
    if Checkpoint::decode(&bytes)?.encode()? != bytes {
        return Err(HpnetError::contract("checkpoint round trip changed the bytes"));
    }
    let frame = &data[0].frames[0];
    let decoded = pgm::decode(&pgm::encode(spec.height, spec.width, frame)?)?;
    if &decoded.pixels != frame {
        return Err(HpnetError::contract("pgm round trip changed the pixels"));
    }
    Ok("dataset, checkpoint and pgm".to_string())
}

type Check = fn() -> Result<String>;

/// Runs every check in a fixed order.
pub fn run_checks() -> Vec<CheckOutcome> {
    let checks: [(&'static str, Check); 5] = [
        ("gradients", check_gradients),
        ("sparse-dense", check_sparse_dense),
        ("telescoping", check_telescoping),
        ("ssim", check_ssim),
        ("formats", check_formats),
    ];
    checks
        .into_iter()
        .map(|(name, f)| CheckOutcome {
            name,
            result: f().map_err(|e| e.to_string()),
        })
        .collect()
}

pub fn selftest() -> ExitCode {
    let mut failed = false;
    for outcome in run_checks() {
        match &outcome.result {
            Ok(detail) => println!("ok   {}: {detail}", outcome.name),
            Err(reason) => {
                failed = true;
                println!("FAIL {}: {reason}", outcome.name);
            }
        }
    }
    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
