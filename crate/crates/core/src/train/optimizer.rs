use crate::error::{HpnetError, Result};
use crate::params::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moment buffers mirror the parameter store.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub(crate) step: u64,
    pub(crate) m: Vec<Vec<f64>>,
    pub(crate) v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Self {
        let zeros: Vec<Vec<f64>> = store.iter().map(|p| vec![0.0; p.data.len()]).collect();
        Adam {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update from `grads` (store order) and zeroes them.
    /// A non-finite gradient aborts before anything is modified.
    pub fn step(&mut self, store: &mut ParamStore, grads: &mut [Vec<f64>]) -> Result<()> {
        if grads.len() != store.len() || self.m.len() != store.len() {
            return Err(HpnetError::contract(format!(
                "{} gradients and {} moment buffers for {} parameters",
                grads.len(),
                self.m.len(),
                store.len()
            )));
        }
        for (p, g) in store.iter().zip(grads.iter()) {
            if g.len() != p.data.len() {
                return Err(HpnetError::contract(format!(
                    "gradient length mismatch for `{}`",
                    p.name
                )));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(HpnetError::NonFiniteGradient(p.name.clone()));
            }
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in store.iter_mut().zip(grads.iter_mut()).zip(&mut self.m).zip(&mut self.v) {
            for (((x, g), m), v) in p.data.iter_mut().zip(g.iter_mut()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = beta1 * *m + (1.0 - beta1) * *g;
                *v = beta2 * *v + (1.0 - beta2) * *g * *g;
                *x -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                *g = 0.0;
            }
        }
        Ok(())
    }
}

/// Rescales `grads` so their joint L2 norm is at most `max_norm`; returns
/// the norm before clipping.
pub fn clip_global_norm(grads: &mut [Vec<f64>], max_norm: f64) -> f64 {
    let norm = grads.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grads.iter_mut().flatten().for_each(|g| *g *= s);
    }
    norm
}
