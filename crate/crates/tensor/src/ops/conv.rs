use super::{kernels, Op};
use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

/// Sizes of one "same"-padded convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub c_in: usize,
    pub c_out: usize,
    pub t: usize,
    pub h: usize,
    pub w: usize,
    pub kt: usize,
    pub kh: usize,
    pub kw: usize,
}

impl ConvGeometry {
    pub fn volume(&self) -> usize {
        self.t * self.h * self.w
    }

    /// Rows of the column buffer: one per (input channel, spatial tap).
    pub fn patch_len(&self) -> usize {
        self.c_in * self.kh * self.kw
    }

    /// Columns of the column buffer: every pixel of the temporally padded clip.
    pub fn column_count(&self) -> usize {
        (self.t + 2 * (self.kt / 2)) * self.h * self.w
    }

    pub fn macs(&self) -> usize {
        self.volume() * self.c_out * self.c_in * self.kt * self.kh * self.kw
    }
}

/// A 3D kernel `[c_out, c_in, k_t, k_h, k_w]` with an optional per-output bias.
#[derive(Debug, Clone)]
pub struct ConvKernel3D {
    pub weight: Tensor,
    pub bias: Option<Tensor>,
}

impl ConvKernel3D {
    pub fn new(weight: Tensor, bias: Option<Tensor>) -> Result<Self> {
        let &[c_out, _, kt, kh, kw] = weight.shape() else {
            return Err(TensorError::InvalidShape {
                op: "ConvKernel3D",
                shape: weight.shape().to_vec(),
                reason: "weights must be [c_out, c_in, k_t, k_h, k_w]",
            });
        };
        if kt % 2 == 0 || kh % 2 == 0 || kw % 2 == 0 {
            return Err(TensorError::InvalidShape {
                op: "ConvKernel3D",
                shape: weight.shape().to_vec(),
                reason: "kernel extents must be odd",
            });
        }
        if let Some(b) = &bias {
            if b.shape() != [c_out] {
                return Err(TensorError::dim("ConvKernel3D bias", weight.shape(), b.shape()));
            }
        }
        Ok(Self { weight, bias })
    }

    pub fn c_out(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn c_in(&self) -> usize {
        self.weight.shape()[1]
    }

    /// `(k_t, k_h, k_w)`.
    pub fn extent(&self) -> (usize, usize, usize) {
        let s = self.weight.shape();
        (s[2], s[3], s[4])
    }

    fn geometry(&self, input: &Tensor, op: &'static str) -> Result<ConvGeometry> {
        let &[c_in, t, h, w] = input.shape() else {
            return Err(TensorError::InvalidShape {
                op,
                shape: input.shape().to_vec(),
                reason: "input must be [channels, depth, height, width]",
            });
        };
        if c_in != self.c_in() {
            return Err(TensorError::dim(op, input.shape(), self.weight.shape()));
        }
        let (kt, kh, kw) = self.extent();
        Ok(ConvGeometry {
            c_in,
            c_out: self.c_out(),
            t,
            h,
            w,
            kt,
            kh,
            kw,
        })
    }
}

/// "Same" zero-padded 3D convolution; output keeps the input's depth,
/// height and width.
pub fn conv3d(input: &Tensor, kernel: &ConvKernel3D) -> Result<Tensor> {
    let geom = kernel.geometry(input, "conv3d")?;
    let mut out = vec![0.0; geom.c_out * geom.volume()];
    kernels::conv3d_forward(
        &geom,
        input.data(),
        kernel.weight.data(),
        kernel.bias.as_ref().map(|b| b.data()),
        &mut out,
    );
    Ok(Tensor::from_op(
        vec![geom.c_out, geom.t, geom.h, geom.w],
        out,
        Op::Conv3d {
            input: input.clone(),
            weight: kernel.weight.clone(),
            bias: kernel.bias.clone(),
            geom,
        },
    ))
}

/// Convolution of a (typically mostly-zero) temporal difference.
///
/// Never adds the bias, so that accumulated outputs of successive
/// differences telescope to the bias-free convolution of the latest input.
/// Only nonzero input sites are visited.
pub fn sparse_conv3d(delta_input: &Tensor, kernel: &ConvKernel3D) -> Result<Tensor> {
    let geom = kernel.geometry(delta_input, "sparse_conv3d")?;
    let mut out = vec![0.0; geom.c_out * geom.volume()];
    kernels::sparse_conv3d_forward(&geom, delta_input.data(), kernel.weight.data(), &mut out);
    Ok(Tensor::from_op(
        vec![geom.c_out, geom.t, geom.h, geom.w],
        out,
        Op::SparseConv3d {
            input: delta_input.clone(),
            weight: kernel.weight.clone(),
            geom,
        },
    ))
}

pub(super) fn backward(op: &Op, grad: &[f64]) {
    match op {
        Op::Conv3d {
            input,
            weight,
            bias,
            geom,
        } => {
            input.accumulate_grad(|g| kernels::conv3d_backward_input(geom, weight.data(), grad, g));
            weight.accumulate_grad(|g| kernels::conv3d_backward_weight(geom, input.data(), grad, g));
            if let Some(b) = bias {
                b.accumulate_grad(|g| kernels::conv3d_backward_bias(geom, grad, g));
            }
        }
        Op::SparseConv3d { input, weight, geom } => {
            input.accumulate_grad(|g| kernels::conv3d_backward_input(geom, weight.data(), grad, g));
            weight.accumulate_grad(|g| kernels::sparse_conv3d_backward_weight(geom, input.data(), grad, g));
        }
        _ => unreachable!("not a convolution"),
    }
}
