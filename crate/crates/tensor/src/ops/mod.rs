//! Differentiable operations. Each op computes its forward value eagerly and,
//! when any operand needs a gradient, records an [`Op`] node for the reverse
//! sweep.

pub mod conv;
mod elementwise;
pub mod kernels;
mod layout;
mod pool;

pub use conv::{conv3d, sparse_conv3d, ConvKernel3D};
pub use layout::concat_channels;

use crate::tensor::Tensor;
use conv::ConvGeometry;

pub(crate) enum Op {
    Add(Tensor, Tensor),
    Sub(Tensor, Tensor),
    Mul(Tensor, Tensor),
    Scale(Tensor, f64),
    Relu(Tensor),
    Sigmoid(Tensor),
    Tanh(Tensor),
    Satlu(Tensor, f64),
    Sum(Tensor),
    Mean(Tensor),
    Reshape(Tensor),
    Concat(Vec<Tensor>),
    SliceChannels {
        input: Tensor,
        offset: usize,
    },
    MaxPool {
        input: Tensor,
        argmax: Vec<usize>,
    },
    Upsample {
        input: Tensor,
        factor: usize,
    },
    Conv3d {
        input: Tensor,
        weight: Tensor,
        bias: Option<Tensor>,
        geom: ConvGeometry,
    },
    SparseConv3d {
        input: Tensor,
        weight: Tensor,
        geom: ConvGeometry,
    },
}

impl Op {
    pub(crate) fn parents(&self) -> Vec<&Tensor> {
        match self {
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => vec![a, b],
            Op::Scale(a, _)
            | Op::Relu(a)
            | Op::Sigmoid(a)
            | Op::Tanh(a)
            | Op::Satlu(a, _)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::Reshape(a) => vec![a],
            Op::Concat(parts) => parts.iter().collect(),
            Op::SliceChannels { input, .. } | Op::MaxPool { input, .. } | Op::Upsample { input, .. } => vec![input],
            Op::Conv3d {
                input, weight, bias, ..
            } => {
                let mut v = vec![input, weight];
                v.extend(bias.iter());
                v
            }
            Op::SparseConv3d { input, weight, .. } => vec![input, weight],
        }
    }

    /// Propagates `grad` (d loss / d output) into the operands' buffers.
    pub(crate) fn backward(&self, out: &Tensor, grad: &[f64]) {
        match self {
            Op::Add(..)
            | Op::Sub(..)
            | Op::Mul(..)
            | Op::Scale(..)
            | Op::Relu(_)
            | Op::Sigmoid(_)
            | Op::Tanh(_)
            | Op::Satlu(..)
            | Op::Sum(_)
            | Op::Mean(_)
            | Op::Reshape(_) => elementwise::backward(self, out, grad),
            Op::Concat(_) | Op::SliceChannels { .. } => layout::backward(self, out, grad),
            Op::MaxPool { .. } | Op::Upsample { .. } => pool::backward(self, grad),
            Op::Conv3d { .. } | Op::SparseConv3d { .. } => conv::backward(self, grad),
        }
    }
}
