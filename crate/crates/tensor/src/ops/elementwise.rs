use super::Op;
use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

fn zip_map(a: &Tensor, b: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>> {
    if a.shape() != b.shape() {
        return Err(TensorError::dim(op, a.shape(), b.shape()));
    }
    Ok(a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect())
}

fn map(a: &Tensor, f: impl Fn(f64) -> f64) -> Vec<f64> {
    a.data().iter().map(|&x| f(x)).collect()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tensor {
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        let data = zip_map(self, other, "add", |x, y| x + y)?;
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            Op::Add(self.clone(), other.clone()),
        ))
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        let data = zip_map(self, other, "sub", |x, y| x - y)?;
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            Op::Sub(self.clone(), other.clone()),
        ))
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &Tensor) -> Result<Tensor> {
        let data = zip_map(self, other, "hadamard", |x, y| x * y)?;
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            Op::Mul(self.clone(), other.clone()),
        ))
    }

    pub fn scale(&self, factor: f64) -> Tensor {
        let data = map(self, |x| x * factor);
        Tensor::from_op(self.shape().to_vec(), data, Op::Scale(self.clone(), factor))
    }

    pub fn relu(&self) -> Tensor {
        let data = map(self, |x| if x > 0.0 { x } else { 0.0 });
        Tensor::from_op(self.shape().to_vec(), data, Op::Relu(self.clone()))
    }

    pub fn sigmoid(&self) -> Tensor {
        let data = map(self, sigmoid);
        Tensor::from_op(self.shape().to_vec(), data, Op::Sigmoid(self.clone()))
    }

    pub fn tanh(&self) -> Tensor {
        let data = map(self, f64::tanh);
        Tensor::from_op(self.shape().to_vec(), data, Op::Tanh(self.clone()))
    }

    /// Saturating linear unit `min(p_max, x)`.
    pub fn satlu(&self, p_max: f64) -> Tensor {
        let data = map(self, |x| if x < p_max { x } else { p_max });
        Tensor::from_op(self.shape().to_vec(), data, Op::Satlu(self.clone(), p_max))
    }

    pub fn sum(&self) -> Tensor {
        let s = compensated_sum(self.data());
        Tensor::from_op(vec![1], vec![s], Op::Sum(self.clone()))
    }

    pub fn mean(&self) -> Tensor {
        let s = compensated_sum(self.data());
        Tensor::from_op(vec![1], vec![s / self.len() as f64], Op::Mean(self.clone()))
    }

    /// `mean((self - target)^2)`.
    pub fn mse(&self, target: &Tensor) -> Result<Tensor> {
        let diff = self.sub(target)?;
        Ok(diff.hadamard(&diff)?.mean())
    }
}

/// Neumaier summation. Loss reductions run over whole feature maps, and a
/// plain running sum leaves enough rounding noise to swamp finite-difference
/// checks of small gradients.
fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for &v in values {
        let t = sum + v;
        carry += if sum.abs() >= v.abs() {
            (sum - t) + v
        } else {
            (v - t) + sum
        };
        sum = t;
    }
    sum + carry
}

pub(super) fn backward(op: &Op, out: &Tensor, grad: &[f64]) {
    match op {
        Op::Add(a, b) => {
            a.accumulate_grad(|g| g.iter_mut().zip(grad).for_each(|(g, d)| *g += d));
            b.accumulate_grad(|g| g.iter_mut().zip(grad).for_each(|(g, d)| *g += d));
        }
        Op::Sub(a, b) => {
            a.accumulate_grad(|g| g.iter_mut().zip(grad).for_each(|(g, d)| *g += d));
            b.accumulate_grad(|g| g.iter_mut().zip(grad).for_each(|(g, d)| *g -= d));
        }
        Op::Mul(a, b) => {
            a.accumulate_grad(|g| {
                for ((g, d), y) in g.iter_mut().zip(grad).zip(b.data()) {
                    *g += d * y;
                }
            });
            b.accumulate_grad(|g| {
                for ((g, d), x) in g.iter_mut().zip(grad).zip(a.data()) {
                    *g += d * x;
                }
            });
        }
        Op::Scale(a, c) => {
            a.accumulate_grad(|g| g.iter_mut().zip(grad).for_each(|(g, d)| *g += c * d));
        }
        Op::Relu(a) => a.accumulate_grad(|g| {
            for ((g, d), x) in g.iter_mut().zip(grad).zip(a.data()) {
                if *x > 0.0 {
                    *g += d;
                }
            }
        }),
        Op::Sigmoid(a) => a.accumulate_grad(|g| {
            for ((g, d), y) in g.iter_mut().zip(grad).zip(out.data()) {
                *g += d * y * (1.0 - y);
            }
        }),
        Op::Tanh(a) => a.accumulate_grad(|g| {
            for ((g, d), y) in g.iter_mut().zip(grad).zip(out.data()) {
                *g += d * (1.0 - y * y);
            }
        }),
        Op::Satlu(a, p_max) => a.accumulate_grad(|g| {
            for ((g, d), x) in g.iter_mut().zip(grad).zip(a.data()) {
                if *x < *p_max {
                    *g += d;
                }
            }
        }),
        Op::Sum(a) => a.accumulate_grad(|g| g.iter_mut().for_each(|g| *g += grad[0])),
        Op::Mean(a) => {
            let d = grad[0] / a.len() as f64;
            a.accumulate_grad(|g| g.iter_mut().for_each(|g| *g += d));
        }
        Op::Reshape(a) => {
            a.accumulate_grad(|g| g.iter_mut().zip(grad).for_each(|(g, d)| *g += d));
        }
        _ => unreachable!("not an elementwise op"),
    }
}
