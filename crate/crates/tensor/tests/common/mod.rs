#![allow(dead_code)]

use hpnet_tensor::{ConvKernel3D, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn random_kernel(
    rng: &mut ChaCha8Rng,
    c_out: usize,
    c_in: usize,
    k: (usize, usize, usize),
    bias: bool,
) -> ConvKernel3D {
    let w = random_tensor(rng, &[c_out, c_in, k.0, k.1, k.2]);
    let b = bias.then(|| random_tensor(rng, &[c_out]));
    ConvKernel3D::new(w, b).unwrap()
}

/// Direct "same"-padded convolution, six nested loops over output and
/// kernel coordinates plus the input channel.
pub fn reference_conv(
    input: &[f64],
    in_shape: [usize; 4],
    weight: &[f64],
    w_shape: [usize; 5],
    bias: Option<&[f64]>,
) -> Vec<f64> {
    let [c_in, t, h, w] = in_shape;
    let [c_out, _, kt, kh, kw] = w_shape;
    let (pt, ph, pw) = ((kt / 2) as isize, (kh / 2) as isize, (kw / 2) as isize);
    let mut out = vec![0.0; c_out * t * h * w];
    for co in 0..c_out {
        for ot in 0..t {
            for oy in 0..h {
                for ox in 0..w {
                    let mut acc = bias.map_or(0.0, |b| b[co]);
                    for ci in 0..c_in {
                        for a in 0..kt {
                            for b in 0..kh {
                                for c in 0..kw {
                                    let it = ot as isize + a as isize - pt;
                                    let iy = oy as isize + b as isize - ph;
                                    let ix = ox as isize + c as isize - pw;
                                    if it < 0
                                        || iy < 0
                                        || ix < 0
                                        || it >= t as isize
                                        || iy >= h as isize
                                        || ix >= w as isize
                                    {
                                        continue;
                                    }
                                    let x = input[((ci * t + it as usize) * h + iy as usize) * w + ix as usize];
                                    let k = weight[(((co * c_in + ci) * kt + a) * kh + b) * kw + c];
                                    acc += x * k;
                                }
                            }
                        }
                    }
                    out[((co * t + ot) * h + oy) * w + ox] = acc;
                }
            }
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
