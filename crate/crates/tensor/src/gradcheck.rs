use crate::error::Result;
use crate::tensor::Tensor;

/// Largest elementwise relative error between the reverse-mode gradient of
/// `f` at `x` and a central finite difference with step `eps`.
///
/// Relative error is `|a - n| / max(|a|, |n|, 1e-8)`. `f` must return a
/// one-element tensor; it is called once with a gradient-tracking copy of `x`
/// and then twice per element with constant perturbed copies.
pub fn grad_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    let var = Tensor::variable(x.shape(), x.to_vec())?;
    let loss = f(&var)?;
    loss.item()?;
    loss.backward()?;
    let analytic = var.grad().unwrap_or_else(|| vec![0.0; x.len()]);

    let mut worst: f64 = 0.0;
    let mut probe = x.to_vec();
    for (i, &a) in analytic.iter().enumerate() {
        let orig = probe[i];
        probe[i] = orig + eps;
        let plus = f(&Tensor::new(x.shape(), probe.clone())?)?.item()?;
        probe[i] = orig - eps;
        let minus = f(&Tensor::new(x.shape(), probe.clone())?)?.item()?;
        probe[i] = orig;
        let numeric = (plus - minus) / (2.0 * eps);
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}
