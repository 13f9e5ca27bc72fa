//! Slice-level convolution kernels behind [`conv3d`](super::conv3d) and
//! [`sparse_conv3d`](super::sparse_conv3d).
//!
//! Dense convolution uses a temporally shifted im2col: the column buffer
//! holds the `c_in × k_h × k_w` spatial patches of every frame of the
//! zero-padded clip, and each temporal tap `a` is one GEMM against the
//! columns offset by `a` frames. This keeps the buffer `k_t` times smaller
//! than a full 3D im2col.
//!
//! All buffers are row-major: activations `[c, t, h, w]`, weights
//! `[c_out, c_in, k_t, k_h, k_w]`.

use std::cell::RefCell;

use super::conv::ConvGeometry;

thread_local! {
    static COLUMNS: RefCell<Vec<f64>> = const { RefCell::new(Vec::new()) };
    static COLUMN_GRADS: RefCell<Vec<f64>> = const { RefCell::new(Vec::new()) };
}

/// Runs `f` on a thread-local scratch buffer of exactly `len` elements.
/// Contents are unspecified on entry.
fn with_scratch<R>(
    key: &'static std::thread::LocalKey<RefCell<Vec<f64>>>,
    len: usize,
    f: impl FnOnce(&mut [f64]) -> R,
) -> R {
    key.with(|cell| {
        let mut buf = cell.borrow_mut();
        if buf.len() < len {
            buf.resize(len, 0.0);
        }
        f(&mut buf[..len])
    })
}

/// `c = alpha * a * b + beta * c` with explicit row/column strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || (m - 1) * rsa + (k - 1) * csa < a.len());
    assert!(k == 0 || (k - 1) * rsb + (n - 1) * csb < b.len());
    assert!((m - 1) * rsc + (n - 1) * csc < c.len());
    // SAFETY: the asserts above bound every index the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// Fills `col` with the spatial patch of every pixel of the zero-padded
/// clip: `col[(t_padded, y, x)][(c_in, k_h, k_w)]`, pixel-major.
fn build_columns(g: &ConvGeometry, input: &[f64], col: &mut [f64]) {
    let (t, h, w) = (g.t, g.h, g.w);
    let plane = h * w;
    let patch = g.patch_len();
    let (pt, ph, pw) = (g.kt / 2, g.kh / 2, g.kw / 2);
    for (tp, frame_cols) in col.chunks_exact_mut(plane * patch).enumerate() {
        if tp < pt || tp >= t + pt {
            frame_cols.fill(0.0);
            continue;
        }
        let ts = tp - pt;
        for y in 0..h {
            for x in 0..w {
                let dst = &mut frame_cols[(y * w + x) * patch..][..patch];
                let interior = x >= pw && x + pw < w;
                let mut k = 0;
                for ci in 0..g.c_in {
                    let frame = &input[(ci * t + ts) * plane..][..plane];
                    for b in 0..g.kh {
                        let d = &mut dst[k..k + g.kw];
                        k += g.kw;
                        let Some(ys) = (y + b).checked_sub(ph).filter(|&v| v < h) else {
                            d.fill(0.0);
                            continue;
                        };
                        let row = &frame[ys * w..][..w];
                        if interior {
                            d.copy_from_slice(&row[x - pw..x - pw + g.kw]);
                        } else {
                            for (c, v) in d.iter_mut().enumerate() {
                                *v = match (x + c).checked_sub(pw) {
                                    Some(xs) if xs < w => row[xs],
                                    _ => 0.0,
                                };
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Adds column gradients back onto the input gradient (adjoint of
/// [`build_columns`]).
fn scatter_columns(g: &ConvGeometry, col: &[f64], grad_in: &mut [f64]) {
    let (t, h, w) = (g.t, g.h, g.w);
    let plane = h * w;
    let patch = g.patch_len();
    let (pt, ph, pw) = (g.kt / 2, g.kh / 2, g.kw / 2);
    for ts in 0..t {
        let frame_cols = &col[(ts + pt) * plane * patch..][..plane * patch];
        for y in 0..h {
            for x in 0..w {
                let src = &frame_cols[(y * w + x) * patch..][..patch];
                let mut k = 0;
                for ci in 0..g.c_in {
                    let frame = &mut grad_in[(ci * t + ts) * plane..][..plane];
                    for b in 0..g.kh {
                        let s = &src[k..k + g.kw];
                        k += g.kw;
                        let Some(ys) = (y + b).checked_sub(ph).filter(|&v| v < h) else {
                            continue;
                        };
                        let row = &mut frame[ys * w..][..w];
                        for (c, v) in s.iter().enumerate() {
                            if let Some(xs) = (x + c).checked_sub(pw).filter(|&v| v < w) {
                                row[xs] += v;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Weights regrouped per temporal tap: `[k_t][c_out][c_in·k_h·k_w]`.
fn weights_by_tap(g: &ConvGeometry, weight: &[f64]) -> Vec<f64> {
    let patch = g.patch_len();
    let spatial = g.kh * g.kw;
    let mut out = vec![0.0; g.kt * g.c_out * patch];
    for co in 0..g.c_out {
        for ci in 0..g.c_in {
            for a in 0..g.kt {
                let src = &weight[((co * g.c_in + ci) * g.kt + a) * spatial..][..spatial];
                let dst = &mut out[(a * g.c_out + co) * patch + ci * spatial..][..spatial];
                dst.copy_from_slice(src);
            }
        }
    }
    out
}

fn forward_from_columns(g: &ConvGeometry, col: &[f64], weight: &[f64], out: &mut [f64]) {
    let volume = g.volume();
    let plane = g.h * g.w;
    let patch = g.patch_len();
    let taps = weights_by_tap(g, weight);
    for a in 0..g.kt {
        gemm(
            g.c_out,
            patch,
            volume,
            &taps[a * g.c_out * patch..],
            (patch, 1),
            &col[a * plane * patch..],
            (1, patch),
            1.0,
            out,
            (volume, 1),
        );
    }
}

/// Dense "same"-padded convolution: `out = weight ⋆ input (+ bias)`.
/// `out` is overwritten.
pub fn conv3d_forward(g: &ConvGeometry, input: &[f64], weight: &[f64], bias: Option<&[f64]>, out: &mut [f64]) {
    match bias {
        Some(b) => {
            for (co, o) in out.chunks_exact_mut(g.volume()).enumerate() {
                o.fill(b[co]);
            }
        }
        None => out.fill(0.0),
    }
    if input.iter().all(|&v| v == 0.0) {
        return;
    }
    with_scratch(&COLUMNS, g.patch_len() * g.column_count(), |col| {
        build_columns(g, input, col);
        forward_from_columns(g, col, weight, out);
    });
}

/// Accumulates d(loss)/d(input) for a dense convolution into `grad_in`.
pub fn conv3d_backward_input(g: &ConvGeometry, weight: &[f64], grad_out: &[f64], grad_in: &mut [f64]) {
    let volume = g.volume();
    let plane = g.h * g.w;
    let patch = g.patch_len();
    let taps = weights_by_tap(g, weight);
    with_scratch(&COLUMN_GRADS, patch * g.column_count(), |dcol| {
        // tap 0 initialises the first `volume` pixels, the rest start at zero
        dcol[volume * patch..].fill(0.0);
        for a in 0..g.kt {
            gemm(
                patch,
                g.c_out,
                volume,
                &taps[a * g.c_out * patch..],
                (1, patch),
                grad_out,
                (volume, 1),
                if a == 0 { 0.0 } else { 1.0 },
                &mut dcol[a * plane * patch..],
                (1, patch),
            );
        }
        scatter_columns(g, dcol, grad_in);
    });
}

/// Accumulates d(loss)/d(weight) for a dense convolution into `grad_w`.
pub fn conv3d_backward_weight(g: &ConvGeometry, input: &[f64], grad_out: &[f64], grad_w: &mut [f64]) {
    if input.iter().all(|&v| v == 0.0) {
        return;
    }
    with_scratch(&COLUMNS, g.patch_len() * g.column_count(), |col| {
        build_columns(g, input, col);
        let volume = g.volume();
        let plane = g.h * g.w;
        let patch = g.patch_len();
        let spatial = g.kh * g.kw;
        let mut tap_grad = vec![0.0; g.c_out * patch];
        for a in 0..g.kt {
            gemm(
                g.c_out,
                volume,
                patch,
                grad_out,
                (volume, 1),
                &col[a * plane * patch..],
                (patch, 1),
                0.0,
                &mut tap_grad,
                (patch, 1),
            );
            for co in 0..g.c_out {
                for ci in 0..g.c_in {
                    let src = &tap_grad[co * patch + ci * spatial..][..spatial];
                    let dst = &mut grad_w[((co * g.c_in + ci) * g.kt + a) * spatial..][..spatial];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
        }
    });
}

/// Accumulates per-channel sums of `grad_out` into `grad_b`.
pub fn conv3d_backward_bias(g: &ConvGeometry, grad_out: &[f64], grad_b: &mut [f64]) {
    for (gb, go) in grad_b.iter_mut().zip(grad_out.chunks_exact(g.volume())) {
        *gb += go.iter().sum::<f64>();
    }
}

/// Flat indices of the nonzero input sites.
fn nonzero_sites(input: &[f64]) -> Vec<usize> {
    input
        .iter()
        .enumerate()
        .filter_map(|(i, &v)| (v != 0.0).then_some(i))
        .collect()
}

/// Calls `f(tap, out_position)` for every kernel tap whose output position
/// lies inside the volume, given an input site `(t, y, x)`.
#[inline]
fn for_each_target(g: &ConvGeometry, site: (usize, usize, usize), mut f: impl FnMut(usize, usize)) {
    let (ts, ys, xs) = site;
    let (pt, ph, pw) = (g.kt / 2, g.kh / 2, g.kw / 2);
    for a in 0..g.kt {
        // output t = ts - a + pt
        let Some(ot) = (ts + pt).checked_sub(a).filter(|&v| v < g.t) else {
            continue;
        };
        for b in 0..g.kh {
            let Some(oy) = (ys + ph).checked_sub(b).filter(|&v| v < g.h) else {
                continue;
            };
            for c in 0..g.kw {
                let Some(ox) = (xs + pw).checked_sub(c).filter(|&v| v < g.w) else {
                    continue;
                };
                f((a * g.kh + b) * g.kw + c, (ot * g.h + oy) * g.w + ox);
            }
        }
    }
}

/// Bias-free convolution evaluated by scattering only the nonzero input
/// sites. Exactly equal in value to [`conv3d_forward`] without bias, up to
/// summation order. `out` is overwritten.
pub fn sparse_conv3d_forward(g: &ConvGeometry, input: &[f64], weight: &[f64], out: &mut [f64]) {
    let volume = g.volume();
    let taps = g.kt * g.kh * g.kw;
    let co_n = g.c_out;
    // weights as [c_in][tap][c_out] so the innermost loop is contiguous
    let mut wt = vec![0.0; g.c_in * taps * co_n];
    for co in 0..co_n {
        for ci in 0..g.c_in {
            for k in 0..taps {
                wt[(ci * taps + k) * co_n + co] = weight[(co * g.c_in + ci) * taps + k];
            }
        }
    }
    // position-major accumulator [volume][c_out]
    let mut acc = vec![0.0; volume * co_n];
    for idx in nonzero_sites(input) {
        let v = input[idx];
        let ci = idx / volume;
        let pos = idx % volume;
        let site = (pos / (g.h * g.w), (pos / g.w) % g.h, pos % g.w);
        let wci = &wt[ci * taps * co_n..][..taps * co_n];
        for_each_target(g, site, |k, o| {
            let w = &wci[k * co_n..][..co_n];
            let dst = &mut acc[o * co_n..][..co_n];
            for (d, w) in dst.iter_mut().zip(w) {
                *d += v * w;
            }
        });
    }
    for co in 0..co_n {
        let dst = &mut out[co * volume..(co + 1) * volume];
        for (pos, d) in dst.iter_mut().enumerate() {
            *d = acc[pos * co_n + co];
        }
    }
}

/// Weight gradient of the sparse convolution, visiting only nonzero input
/// sites. Accumulates into `grad_w`.
pub fn sparse_conv3d_backward_weight(g: &ConvGeometry, input: &[f64], grad_out: &[f64], grad_w: &mut [f64]) {
    let volume = g.volume();
    let taps = g.kt * g.kh * g.kw;
    let co_n = g.c_out;
    let sites = nonzero_sites(input);
    if sites.is_empty() {
        return;
    }
    let mut go_t = vec![0.0; volume * co_n];
    for co in 0..co_n {
        for (pos, v) in grad_out[co * volume..(co + 1) * volume].iter().enumerate() {
            go_t[pos * co_n + co] = *v;
        }
    }
    let mut gw_t = vec![0.0; g.c_in * taps * co_n];
    for idx in sites {
        let v = input[idx];
        let ci = idx / volume;
        let pos = idx % volume;
        let site = (pos / (g.h * g.w), (pos / g.w) % g.h, pos % g.w);
        let dst_ci = &mut gw_t[ci * taps * co_n..][..taps * co_n];
        for_each_target(g, site, |k, o| {
            let src = &go_t[o * co_n..][..co_n];
            let dst = &mut dst_ci[k * co_n..][..co_n];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += v * s;
            }
        });
    }
    for co in 0..co_n {
        for ci in 0..g.c_in {
            for k in 0..taps {
                grad_w[(co * g.c_in + ci) * taps + k] += gw_t[(ci * taps + k) * co_n + co];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns_round_trip_counts_taps() {
        // scatter(build(x = 1)) counts how many taps read each site
        let g = ConvGeometry {
            c_in: 1,
            c_out: 1,
            t: 1,
            h: 3,
            w: 3,
            kt: 1,
            kh: 3,
            kw: 3,
        };
        let x = vec![1.0; 9];
        let mut col = vec![0.0; g.patch_len() * g.column_count()];
        build_columns(&g, &x, &mut col);
        let mut back = vec![0.0; 9];
        scatter_columns(&g, &col, &mut back);
        assert_eq!(back, vec![4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0]);
    }
}
