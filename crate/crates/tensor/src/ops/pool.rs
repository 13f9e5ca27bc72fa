use super::Op;
use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

fn spatial_dims(t: &Tensor, op: &'static str) -> Result<(usize, usize, usize, usize)> {
    match *t.shape() {
        [c, d, h, w] => Ok((c, d, h, w)),
        _ => Err(TensorError::InvalidShape {
            op,
            shape: t.shape().to_vec(),
            reason: "expected [channels, depth, height, width]",
        }),
    }
}

impl Tensor {
    /// Max over non-overlapping `factor`×`factor` spatial windows; depth is
    /// untouched. Ties go to the lowest flat index in the window.
    pub fn maxpool_spatial(&self, factor: usize) -> Result<Tensor> {
        let (c, d, h, w) = spatial_dims(self, "maxpool_spatial")?;
        if factor == 0 || h % factor != 0 || w % factor != 0 {
            return Err(TensorError::InvalidShape {
                op: "maxpool_spatial",
                shape: self.shape().to_vec(),
                reason: "height and width must be divisible by the pooling factor",
            });
        }
        let (oh, ow) = (h / factor, w / factor);
        let x = self.data();
        let mut data = Vec::with_capacity(c * d * oh * ow);
        let mut argmax = Vec::with_capacity(c * d * oh * ow);
        for plane in 0..c * d {
            let base = plane * h * w;
            for i in 0..oh {
                for j in 0..ow {
                    let mut best = base + i * factor * w + j * factor;
                    for di in 0..factor {
                        for dj in 0..factor {
                            let idx = base + (i * factor + di) * w + j * factor + dj;
                            if x[idx] > x[best] {
                                best = idx;
                            }
                        }
                    }
                    data.push(x[best]);
                    argmax.push(best);
                }
            }
        }
        Ok(Tensor::from_op(
            vec![c, d, oh, ow],
            data,
            Op::MaxPool {
                input: self.clone(),
                argmax,
            },
        ))
    }

    /// Nearest-neighbour spatial expansion by `factor`.
    pub fn upsample_spatial(&self, factor: usize) -> Result<Tensor> {
        let (c, d, h, w) = spatial_dims(self, "upsample_spatial")?;
        if factor == 0 {
            return Err(TensorError::InvalidShape {
                op: "upsample_spatial",
                shape: self.shape().to_vec(),
                reason: "factor must be at least 1",
            });
        }
        let (oh, ow) = (h * factor, w * factor);
        let x = self.data();
        let mut data = Vec::with_capacity(c * d * oh * ow);
        for plane in 0..c * d {
            let base = plane * h * w;
            for i in 0..oh {
                let row = &x[base + (i / factor) * w..base + (i / factor + 1) * w];
                for j in 0..ow {
                    data.push(row[j / factor]);
                }
            }
        }
        Ok(Tensor::from_op(
            vec![c, d, oh, ow],
            data,
            Op::Upsample {
                input: self.clone(),
                factor,
            },
        ))
    }
}

pub(super) fn backward(op: &Op, grad: &[f64]) {
    match op {
        Op::MaxPool { input, argmax } => input.accumulate_grad(|g| {
            for (&idx, d) in argmax.iter().zip(grad) {
                g[idx] += d;
            }
        }),
        Op::Upsample { input, factor } => {
            let [_, _, h, w] = *input.shape() else { unreachable!() };
            let (oh, ow) = (h * factor, w * factor);
            input.accumulate_grad(|g| {
                for (plane, gp) in grad.chunks_exact(oh * ow).enumerate() {
                    let base = plane * h * w;
                    for i in 0..oh {
                        for j in 0..ow {
                            g[base + (i / factor) * w + j / factor] += gp[i * ow + j];
                        }
                    }
                }
            });
        }
        _ => unreachable!("not a pooling op"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_window_max() {
        let x = Tensor::new(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(x.maxpool_spatial(2).unwrap().to_vec(), vec![4.0]);
    }

    #[test]
    fn constant_pools_to_constant() {
        let x = Tensor::full(&[2, 3, 4, 6], 0.7);
        let y = x.maxpool_spatial(2).unwrap();
        assert_eq!(y.shape(), &[2, 3, 2, 3]);
        assert!(y.data().iter().all(|&v| v == 0.7));
    }

    #[test]
    fn odd_sizes_are_rejected() {
        let x = Tensor::zeros(&[1, 1, 3, 4]);
        assert!(matches!(x.maxpool_spatial(2), Err(TensorError::InvalidShape { .. })));
    }

    #[test]
    fn tie_gradient_goes_to_first_element() {
        let x = Tensor::variable(&[1, 1, 2, 2], vec![5.0, 5.0, 5.0, 5.0]).unwrap();
        x.maxpool_spatial(2).unwrap().sum().backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn upsample_scalar() {
        let x = Tensor::new(&[1, 1, 1, 1], vec![2.5]).unwrap();
        let y = x.upsample_spatial(2).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert_eq!(y.to_vec(), vec![2.5; 4]);
    }

    #[test]
    fn upsample_gradient_counts_copies() {
        let x = Tensor::variable(&[2, 1, 2, 3], (0..12).map(f64::from).collect()).unwrap();
        x.upsample_spatial(2).unwrap().sum().backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![4.0; 12]);
    }
}
