use hpnet_tensor::{concat_channels, conv3d, ConvKernel3D, Tensor, TensorError};

use crate::error::Result;

/// Convolutional LSTM cell with 3D kernels.
///
/// The four gate kernels (input, forget, output, cell candidate) are stacked
/// into one convolution over `[z, h_prev]` whose outputs are split in that
/// order.
#[derive(Debug, Clone)]
pub struct ConvLstm3d {
    gates: ConvKernel3D,
    hidden: usize,
}

impl ConvLstm3d {
    /// `weights` and `biases` are ordered input, forget, output, cell.
    pub fn from_gates(weights: [&Tensor; 4], biases: [&Tensor; 4]) -> Result<Self> {
        let hidden = weights[0].shape()[0];
        for w in &weights[1..] {
            if w.shape() != weights[0].shape() {
                return Err(TensorError::Dimension {
                    op: "ConvLstm3d gates",
                    lhs: weights[0].shape().to_vec(),
                    rhs: w.shape().to_vec(),
                }
                .into());
            }
        }
        let weight = concat_channels(&weights)?;
        let bias = concat_channels(&biases)?;
        Ok(ConvLstm3d {
            gates: ConvKernel3D::new(weight, Some(bias))?,
            hidden,
        })
    }

    pub fn hidden_channels(&self) -> usize {
        self.hidden
    }

    /// Channels of `z` plus `h_prev` the gate convolution expects.
    pub fn gate_input_channels(&self) -> usize {
        self.gates.c_in()
    }

    /// One update; returns `(h, c)`.
    pub fn step(&self, z: &Tensor, h_prev: &Tensor, c_prev: &Tensor) -> Result<(Tensor, Tensor)> {
        if h_prev.shape() != c_prev.shape() || h_prev.shape()[0] != self.hidden {
            return Err(TensorError::Dimension {
                op: "lstm3d_step state",
                lhs: h_prev.shape().to_vec(),
                rhs: c_prev.shape().to_vec(),
            }
            .into());
        }
        let pre = conv3d(&concat_channels(&[z, h_prev])?, &self.gates)?;
        let c = self.hidden;
        let input = pre.slice_channels(0, c)?.sigmoid();
        let forget = pre.slice_channels(c, c)?.sigmoid();
        let output = pre.slice_channels(2 * c, c)?.sigmoid();
        let candidate = pre.slice_channels(3 * c, c)?.tanh();
        let cell = forget.hadamard(c_prev)?.add(&input.hadamard(&candidate)?)?;
        let hidden = output.hadamard(&cell.tanh())?;
        Ok((hidden, cell))
    }
}

pub fn lstm3d_step(lstm: &ConvLstm3d, z: &Tensor, h_prev: &Tensor, c_prev: &Tensor) -> Result<(Tensor, Tensor)> {
    lstm.step(z, h_prev, c_prev)
}
