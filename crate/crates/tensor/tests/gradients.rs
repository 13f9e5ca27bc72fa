//! Reverse-mode gradients of every differentiable op against central
//! finite differences.

mod common;

use common::*;
use hpnet_tensor::{concat_channels, conv3d, grad_check, sparse_conv3d, ConvKernel3D, Tensor};

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-4;

/// Weighted sum so that every output element gets a distinct cotangent.
fn probe(t: &Tensor, seed: u64) -> hpnet_tensor::Result<Tensor> {
    let mut r = rng(seed);
    let w = random_tensor(&mut r, t.shape());
    Ok(t.hadamard(&w)?.sum())
}

fn check(name: &str, x: &Tensor, f: impl Fn(&Tensor) -> hpnet_tensor::Result<Tensor>) {
    let err = grad_check(f, x, EPS).unwrap();
    assert!(err < TOL, "{name}: max relative error {err:e}");
}

#[test]
fn unary_ops() {
    let mut r = rng(31);
    // keep clear of the kinks at 0 and p_max
    let x = Tensor::new(
        &[3, 2, 2, 2],
        random_tensor(&mut r, &[3, 2, 2, 2])
            .data()
            .iter()
            .map(|v| if v.abs() < 0.05 { v + 0.2 } else { *v })
            .collect(),
    )
    .unwrap();
    check("relu", &x, |t| probe(&t.relu(), 1));
    check("sigmoid", &x, |t| probe(&t.sigmoid(), 2));
    check("tanh", &x, |t| probe(&t.tanh(), 3));
    check("satlu", &x, |t| probe(&t.satlu(0.5), 4));
    check("scale", &x, |t| probe(&t.scale(-1.7), 5));
    check("mean", &x, |t| Ok(t.mean().scale(3.0)));
    check("sum", &x, |t| Ok(t.sum()));
    check("reshape", &x, |t| probe(&t.reshape(&[6, 4])?, 6));
}

#[test]
fn binary_ops() {
    let mut r = rng(32);
    let x = random_tensor(&mut r, &[2, 3, 2, 2]);
    let other = random_tensor(&mut r, &[2, 3, 2, 2]);
    check("add", &x, |t| probe(&t.add(&other)?, 1));
    check("sub-left", &x, |t| probe(&t.sub(&other)?, 2));
    check("sub-right", &x, |t| probe(&other.sub(t)?, 3));
    check("hadamard", &x, |t| probe(&t.hadamard(&other)?, 4));
    check("hadamard-self", &x, |t| probe(&t.hadamard(t)?, 5));
    check("mse", &x, |t| t.mse(&other));
}

#[test]
fn layout_and_pooling_ops() {
    let mut r = rng(33);
    let x = random_tensor(&mut r, &[2, 2, 4, 4]);
    let other = random_tensor(&mut r, &[3, 2, 4, 4]);
    check("concat", &x, |t| probe(&concat_channels(&[&other, t, &other])?, 1));
    check("slice", &x, |t| probe(&t.slice_channels(1, 1)?, 2));
    check("maxpool", &x, |t| probe(&t.maxpool_spatial(2)?, 3));
    check("upsample", &x, |t| probe(&t.upsample_spatial(2)?, 4));
}

#[test]
fn convolutions() {
    let mut r = rng(34);
    let x = random_tensor(&mut r, &[2, 3, 4, 4]);
    let k = random_kernel(&mut r, 3, 2, (3, 3, 3), true);
    check("conv3d-input", &x, |t| probe(&conv3d(t, &k)?, 1));
    check("conv3d-sum", &x, |t| Ok(conv3d(t, &k)?.sum()));
    let w = k.weight.clone();
    let b = k.bias.clone().unwrap();
    check("conv3d-weight", &w.detach(), |wt| {
        probe(&conv3d(&x, &ConvKernel3D::new(wt.clone(), Some(b.clone()))?)?, 2)
    });
    check("conv3d-bias", &b.detach(), |bt| {
        probe(&conv3d(&x, &ConvKernel3D::new(w.clone(), Some(bt.clone()))?)?, 3)
    });
    check("conv3d-2d-kernel", &x, |t| {
        probe(&conv3d(t, &random_kernel(&mut rng(9), 2, 2, (1, 3, 3), false))?, 4)
    });

    let mut sparse = x.to_vec();
    for (i, v) in sparse.iter_mut().enumerate() {
        if i % 3 != 0 {
            *v = 0.0;
        }
    }
    let xs = Tensor::new(x.shape(), sparse).unwrap();
    check("sparse-input", &xs, |t| probe(&sparse_conv3d(t, &k)?, 5));
    check("sparse-weight", &w.detach(), |wt| {
        probe(&sparse_conv3d(&xs, &ConvKernel3D::new(wt.clone(), None)?)?, 6)
    });
}

#[test]
fn composite_chain() {
    let mut r = rng(35);
    let x = random_tensor(&mut r, &[1, 2, 4, 4]);
    let k1 = random_kernel(&mut r, 4, 1, (3, 3, 3), true);
    let k2 = random_kernel(&mut r, 1, 4, (3, 3, 3), true);
    check("conv-relu-pool-up-conv", &x, |t| {
        let h = conv3d(t, &k1)?.tanh().maxpool_spatial(2)?.upsample_spatial(2)?;
        let y = conv3d(&h, &k2)?.sigmoid();
        y.mse(&Tensor::full(&[1, 2, 4, 4], 0.3))
    });
}
