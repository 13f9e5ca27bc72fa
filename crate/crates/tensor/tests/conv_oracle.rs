mod common;

use common::*;
use hpnet_tensor::{conv3d, sparse_conv3d, ConvKernel3D, Tensor};
use proptest::prelude::*;

fn shape4(t: &Tensor) -> [usize; 4] {
    t.shape().try_into().unwrap()
}

fn shape5(t: &Tensor) -> [usize; 5] {
    t.shape().try_into().unwrap()
}

#[test]
fn dense_conv_matches_loop_reference() {
    let mut r = rng(11);
    let x = random_tensor(&mut r, &[2, 3, 4, 4]);
    let k = random_kernel(&mut r, 3, 2, (3, 3, 3), true);
    let got = conv3d(&x, &k).unwrap();
    let want = reference_conv(
        x.data(),
        shape4(&x),
        k.weight.data(),
        shape5(&k.weight),
        Some(k.bias.as_ref().unwrap().data()),
    );
    assert_eq!(got.shape(), &[3, 3, 4, 4]);
    assert!(max_abs_diff(got.data(), &want) < 1e-12);
}

#[test]
fn dense_conv_matches_reference_on_odd_geometries() {
    let mut r = rng(12);
    for (shape, k) in [
        ([1, 1, 1, 1], (1, 1, 1)),
        ([3, 1, 5, 2], (3, 3, 3)),
        ([2, 5, 3, 7], (3, 1, 5)),
        ([4, 2, 6, 6], (1, 3, 3)),
    ] {
        let x = random_tensor(&mut r, &shape);
        let kernel = random_kernel(&mut r, 2, shape[0], k, true);
        let got = conv3d(&x, &kernel).unwrap();
        let want = reference_conv(
            x.data(),
            shape,
            kernel.weight.data(),
            shape5(&kernel.weight),
            Some(kernel.bias.as_ref().unwrap().data()),
        );
        assert!(max_abs_diff(got.data(), &want) < 1e-12, "{shape:?} {k:?}");
    }
}

#[test]
fn single_impulse_spreads_reversed_kernel() {
    let mut r = rng(13);
    let k = random_kernel(&mut r, 2, 1, (3, 3, 3), true);
    let (t, h, w) = (5, 6, 6);
    let (it, iy, ix) = (2usize, 3usize, 2usize);
    let v = 0.75;
    let mut data = vec![0.0; t * h * w];
    data[(it * h + iy) * w + ix] = v;
    let x = Tensor::new(&[1, t, h, w], data).unwrap();
    let y = sparse_conv3d(&x, &k).unwrap();
    // out[co, it - a + 1, iy - b + 1, ix - c + 1] == v * w[co, 0, a, b, c]
    let wd = k.weight.data();
    let mut expected = vec![0.0; 2 * t * h * w];
    for co in 0..2 {
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    let (ot, oy, ox) = (it + 1 - a, iy + 1 - b, ix + 1 - c);
                    expected[((co * t + ot) * h + oy) * w + ox] = v * wd[((co * 3 + a) * 3 + b) * 3 + c];
                }
            }
        }
    }
    assert_eq!(y.to_vec(), expected);
}

#[test]
fn sparse_matches_bias_free_dense_on_sparse_input() {
    let mut r = rng(14);
    let mut x = random_tensor(&mut r, &[2, 5, 8, 8]).to_vec();
    for (i, v) in x.iter_mut().enumerate() {
        if i % 7 != 0 {
            *v = 0.0;
        }
    }
    let x = Tensor::new(&[2, 5, 8, 8], x).unwrap();
    let k = random_kernel(&mut r, 4, 2, (3, 3, 3), true);
    let no_bias = ConvKernel3D::new(k.weight.clone(), None).unwrap();
    let sparse = sparse_conv3d(&x, &k).unwrap();
    let dense = conv3d(&x, &no_bias).unwrap();
    assert!(max_abs_diff(sparse.data(), dense.data()) < 1e-12);
}

fn conv_case() -> impl Strategy<Value = (usize, usize, [usize; 3], [usize; 3], u64, u32)> {
    (
        1usize..4,
        1usize..4,
        [1usize..5, 1usize..6, 1usize..6],
        prop_oneof![Just([3, 3, 3]), Just([1, 3, 3]), Just([1, 1, 1]), Just([3, 1, 3])],
        any::<u64>(),
        0u32..4,
    )
        .prop_map(|(ci, co, [t, h, w], k, seed, sparsity)| (ci, co, [t, h, w], k, seed, sparsity))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sparse_equals_bias_free_dense((ci, co, [t, h, w], [kt, kh, kw], seed, sparsity) in conv_case()) {
        let mut r = rng(seed);
        let mut x = random_tensor(&mut r, &[ci, t, h, w]).to_vec();
        for (i, v) in x.iter_mut().enumerate() {
            if sparsity > 0 && i % (sparsity as usize + 1) != 0 {
                *v = 0.0;
            }
        }
        let x = Tensor::new(&[ci, t, h, w], x).unwrap();
        let k = random_kernel(&mut r, co, ci, (kt, kh, kw), false);
        let sparse = sparse_conv3d(&x, &k).unwrap();
        let dense = conv3d(&x, &k).unwrap();
        let reference = reference_conv(x.data(), [ci, t, h, w], k.weight.data(), [co, ci, kt, kh, kw], None);
        prop_assert!(max_abs_diff(sparse.data(), dense.data()) < 1e-12);
        prop_assert!(max_abs_diff(dense.data(), &reference) < 1e-12);
    }

    #[test]
    fn identity_kernel_is_identity(seed in any::<u64>(), c in 1usize..4, t in 1usize..4, h in 1usize..6, w in 1usize..6) {
        let mut r = rng(seed);
        let x = random_tensor(&mut r, &[c, t, h, w]);
        let mut wts = vec![0.0; c * c * 27];
        for i in 0..c {
            wts[(i * c + i) * 27 + 13] = 1.0;
        }
        let k = ConvKernel3D::new(Tensor::new(&[c, c, 3, 3, 3], wts).unwrap(), Some(Tensor::zeros(&[c]))).unwrap();
        prop_assert_eq!(conv3d(&x, &k).unwrap().to_vec(), x.to_vec());
    }
}
