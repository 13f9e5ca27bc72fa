use super::Op;
use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

/// Stacks tensors along axis 0 in argument order. All parts must agree on
/// every other axis.
pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
    let Some(first) = parts.first() else {
        return Err(TensorError::Contract("concat_channels of an empty list".into()));
    };
    let tail = &first.shape()[1..];
    let mut channels = 0;
    for p in parts {
        if p.shape().len() != first.shape().len() || &p.shape()[1..] != tail {
            return Err(TensorError::dim("concat_channels", first.shape(), p.shape()));
        }
        channels += p.shape()[0];
    }
    let mut data = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
    for p in parts {
        data.extend_from_slice(p.data());
    }
    let mut shape = first.shape().to_vec();
    shape[0] = channels;
    Ok(Tensor::from_op(
        shape,
        data,
        Op::Concat(parts.iter().map(|&p| p.clone()).collect()),
    ))
}

impl Tensor {
    /// Channels `[start, start + count)` along axis 0.
    pub fn slice_channels(&self, start: usize, count: usize) -> Result<Tensor> {
        let c = self.shape()[0];
        if count == 0 || start + count > c {
            return Err(TensorError::InvalidShape {
                op: "slice_channels",
                shape: self.shape().to_vec(),
                reason: "channel range out of bounds",
            });
        }
        let inner = self.len() / c;
        let offset = start * inner;
        let data = self.data()[offset..offset + count * inner].to_vec();
        let mut shape = self.shape().to_vec();
        shape[0] = count;
        Ok(Tensor::from_op(
            shape,
            data,
            Op::SliceChannels {
                input: self.clone(),
                offset,
            },
        ))
    }
}

pub(super) fn backward(op: &Op, out: &Tensor, grad: &[f64]) {
    match op {
        Op::Concat(parts) => {
            let mut offset = 0;
            for p in parts {
                let n = p.len();
                let slice = &grad[offset..offset + n];
                p.accumulate_grad(|g| g.iter_mut().zip(slice).for_each(|(g, d)| *g += d));
                offset += n;
            }
        }
        Op::SliceChannels { input, offset } => {
            let n = out.len();
            input.accumulate_grad(|g| g[*offset..*offset + n].iter_mut().zip(grad).for_each(|(g, d)| *g += d));
        }
        _ => unreachable!("not a layout op"),
    }
}
