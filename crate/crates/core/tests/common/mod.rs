#![allow(dead_code)]

use hpnet::metrics::{SSIM_SIGMA, SSIM_WINDOW};

/// SSIM evaluated window by window with a full 2D Gaussian and two-pass
/// variances.
pub fn direct_ssim(x: &[f64], y: &[f64], h: usize, w: usize) -> f64 {
    let r = (SSIM_WINDOW / 2) as isize;
    let mut kernel = vec![0.0; SSIM_WINDOW * SSIM_WINDOW];
    for i in 0..SSIM_WINDOW {
        for j in 0..SSIM_WINDOW {
            let (di, dj) = (i as isize - r, j as isize - r);
            kernel[i * SSIM_WINDOW + j] = (-((di * di + dj * dj) as f64) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        }
    }
    let z: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= z);
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut total = 0.0;
    let mut count = 0;
    for oy in 0..=h - SSIM_WINDOW {
        for ox in 0..=w - SSIM_WINDOW {
            let at = |img: &[f64], i: usize, j: usize| img[(oy + i) * w + ox + j];
            let (mut mx, mut my) = (0.0, 0.0);
            for i in 0..SSIM_WINDOW {
                for j in 0..SSIM_WINDOW {
                    let k = kernel[i * SSIM_WINDOW + j];
                    mx += k * at(x, i, j);
                    my += k * at(y, i, j);
                }
            }
            let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..SSIM_WINDOW {
                for j in 0..SSIM_WINDOW {
                    let k = kernel[i * SSIM_WINDOW + j];
                    let (dx, dy) = (at(x, i, j) - mx, at(y, i, j) - my);
                    vx += k * dx * dx;
                    vy += k * dy * dy;
                    cov += k * dx * dy;
                }
            }
            total += (2.0 * mx * my + c1) * (2.0 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    total / count as f64
}
