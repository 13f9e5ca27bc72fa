use hpnet_tensor::{grad_check, Tensor, TensorError};

use super::{Network, NetworkState};
use crate::config::HpnetConfig;
use crate::error::{HpnetError, Result};
use crate::params::ParamStore;

fn as_tensor_error(e: HpnetError) -> TensorError {
    match e {
        HpnetError::Tensor(t) => t,
        other => TensorError::Contract(other.to_string()),
    }
}

fn leaves(store: &ParamStore) -> Result<Vec<Tensor>> {
    Ok(store
        .iter()
        .map(|p| Tensor::new(&p.shape, p.data.clone()))
        .collect::<std::result::Result<_, _>>()?)
}

/// Checks every parameter tensor in store order, swapping it for the probe
/// tensor inside an otherwise constant network.
fn check_each<F>(config: &HpnetConfig, store: &ParamStore, eps: f64, loss_of: F) -> Result<Vec<(String, f64)>>
where
    F: Fn(&Network) -> Result<Tensor>,
{
    let fixed = leaves(store)?;
    let mut out = Vec::with_capacity(store.len());
    for (i, p) in store.iter().enumerate() {
        let loss = |x: &Tensor| -> hpnet_tensor::Result<Tensor> {
            let mut leaves = fixed.clone();
            leaves[i] = x.clone();
            let net = Network::from_tensors(config, leaves).map_err(as_tensor_error)?;
            loss_of(&net).map_err(as_tensor_error)
        };
        out.push((p.name.clone(), grad_check(loss, &fixed[i], eps)?));
    }
    Ok(out)
}

/// Worst relative error of every parameter tensor's gradient of one step's
/// loss from a fixed `state`, against central differences with step `eps`.
pub fn step_grad_check(
    config: &HpnetConfig,
    store: &ParamStore,
    state: &NetworkState,
    block: &Tensor,
    eps: f64,
) -> Result<Vec<(String, f64)>> {
    check_each(config, store, eps, |net| Ok(net.step(state, block)?.loss))
}

/// Worst relative error of every parameter tensor's gradient of the
/// teacher-forced sequence loss against central differences with step
/// `eps`, in store order.
pub fn sequence_grad_check(
    config: &HpnetConfig,
    store: &ParamStore,
    blocks: &[Tensor],
    eps: f64,
) -> Result<Vec<(String, f64)>> {
    check_each(config, store, eps, |net| Ok(net.forward_sequence(blocks)?.loss))
}
