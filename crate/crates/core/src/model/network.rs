use std::collections::HashMap;

use hpnet_tensor::{ConvKernel3D, Tensor};

use super::lstm::ConvLstm3d;
use super::module::{check_state, pooled_drive, pooled_input, CorticalModule, CorticalModuleState, Hypothesis};
use crate::config::{HpnetConfig, Scheme};
use crate::data::extract_blocks;
use crate::error::{HpnetError, Result};
use crate::params::{level_name, ParamStore, GATES};

#[derive(Debug, Clone)]
pub struct NetworkState {
    pub levels: Vec<CorticalModuleState>,
}

/// Everything one step produced, per level bottom first.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub state: NetworkState,
    pub inputs: Vec<Tensor>,
    pub predictions: Vec<Tensor>,
    pub level_losses: Vec<Tensor>,
    /// Level-weighted sum of `level_losses`.
    pub loss: Tensor,
}

#[derive(Debug, Clone)]
pub struct SequenceOutput {
    /// Step-weighted total loss.
    pub loss: Tensor,
    pub step_losses: Vec<f64>,
    /// Bottom-level prediction of every step.
    pub predictions: Vec<Tensor>,
}

/// A network instantiated from a [`ParamStore`], ready to build graphs.
///
/// Holds reference-counted tensors, so each thread builds its own.
#[derive(Debug, Clone)]
pub struct Network {
    config: HpnetConfig,
    modules: Vec<CorticalModule>,
    leaves: Vec<Tensor>,
}

impl Network {
    /// With `trainable`, parameters are graph leaves whose gradients can be
    /// read back with [`Network::gradients`] after a backward pass.
    pub fn new(config: &HpnetConfig, store: &ParamStore, trainable: bool) -> Result<Self> {
        let mut leaves = Vec::with_capacity(store.len());
        for p in store.iter() {
            leaves.push(if trainable {
                Tensor::variable(&p.shape, p.data.clone())?
            } else {
                Tensor::new(&p.shape, p.data.clone())?
            });
        }
        Self::from_tensors(config, leaves)
    }

    /// Builds a network around caller-owned parameter tensors, given in
    /// [`ParamStore`] order. Lets a gradient check probe one parameter.
    pub fn from_tensors(config: &HpnetConfig, leaves: Vec<Tensor>) -> Result<Self> {
        config.validate()?;
        let layout = ParamStore::zeros(config);
        if layout.len() != leaves.len() {
            return Err(HpnetError::contract(format!(
                "expected {} parameter tensors, got {}",
                layout.len(),
                leaves.len()
            )));
        }
        let mut by_name = HashMap::new();
        for (p, t) in layout.iter().zip(&leaves) {
            if t.shape() != p.shape {
                return Err(HpnetError::contract(format!(
                    "parameter `{}` has shape {:?}, expected {:?}",
                    p.name,
                    t.shape(),
                    p.shape
                )));
            }
            by_name.insert(p.name.as_str(), t.clone());
        }
        let get = |l: usize, part: &str| -> Result<Tensor> {
            let name = level_name(l, part);
            by_name
                .get(name.as_str())
                .cloned()
                .ok_or_else(|| HpnetError::contract(format!("missing parameter `{name}`")))
        };
        let mut modules = Vec::with_capacity(config.levels());
        for l in 0..config.levels() {
            let mut weights = Vec::new();
            let mut biases = Vec::new();
            for gate in GATES {
                weights.push(get(l, &format!("lstm.{gate}.weight"))?);
                biases.push(get(l, &format!("lstm.{gate}.bias"))?);
            }
            let lstm = ConvLstm3d::from_gates(
                [&weights[0], &weights[1], &weights[2], &weights[3]],
                [&biases[0], &biases[1], &biases[2], &biases[3]],
            )?;
            modules.push(CorticalModule {
                level: l,
                feedforward: ConvKernel3D::new(get(l, "feedforward.weight")?, None)?,
                error: ConvKernel3D::new(get(l, "error.weight")?, None)?,
                lstm,
                prediction: ConvKernel3D::new(get(l, "prediction.weight")?, Some(get(l, "prediction.bias")?))?,
                saturation: (l == 0).then_some(config.p_max),
            });
        }
        Ok(Network {
            config: config.clone(),
            modules,
            leaves,
        })
    }

    pub fn config(&self) -> &HpnetConfig {
        &self.config
    }

    pub fn module(&self, level: usize) -> &CorticalModule {
        &self.modules[level]
    }

    /// Parameter gradients in store order; zeros where nothing flowed.
    pub fn gradients(&self) -> Vec<Vec<f64>> {
        self.leaves
            .iter()
            .map(|t| t.grad().unwrap_or_else(|| vec![0.0; t.len()]))
            .collect()
    }

    pub fn initial_state(&self) -> NetworkState {
        NetworkState {
            levels: (0..self.config.levels())
                .map(|l| CorticalModuleState::zeros(&self.config, l))
                .collect(),
        }
    }

    fn check(&self, state: &NetworkState) -> Result<()> {
        if state.levels.len() != self.config.levels() {
            return Err(HpnetError::contract(format!(
                "state has {} levels, network has {}",
                state.levels.len(),
                self.config.levels()
            )));
        }
        for (l, s) in state.levels.iter().enumerate() {
            check_state(s, &self.config, l)?;
        }
        Ok(())
    }

    /// Top-down pass producing every level's hypothesis for the coming
    /// input. Uses only the state left by the previous step; the hidden
    /// state of each level is handed down to the level below within the
    /// same pass.
    pub fn predict(&self, state: &NetworkState) -> Result<Vec<Hypothesis>> {
        self.check(state)?;
        let levels = self.config.levels();
        let mut out: Vec<Option<Hypothesis>> = vec![None; levels];
        for l in (0..levels).rev() {
            let drive = if l == 0 {
                state.levels[0].input_prev.clone()
            } else {
                pooled_drive(&state.levels[l - 1])?
            };
            let above = out.get(l + 1).and_then(|h| h.as_ref()).map(|h| &h.hidden);
            out[l] = Some(self.modules[l].predict(&drive, &state.levels[l], above)?);
        }
        Ok(out.into_iter().map(|h| h.expect("every level predicted")).collect())
    }

    /// Bottom-up pass absorbing `block` against the hypotheses from
    /// [`Network::predict`].
    pub fn observe(&self, state: &NetworkState, hypotheses: Vec<Hypothesis>, block: &Tensor) -> Result<StepOutput> {
        let expected = self.config.input_shape(0);
        if block.shape() != expected {
            return Err(hpnet_tensor::TensorError::Dimension {
                op: "network input block",
                lhs: block.shape().to_vec(),
                rhs: expected.to_vec(),
            }
            .into());
        }
        let levels = self.config.levels();
        let mut new_levels = Vec::with_capacity(levels);
        let mut inputs = Vec::with_capacity(levels);
        let mut predictions = Vec::with_capacity(levels);
        let mut level_losses = Vec::with_capacity(levels);
        let mut loss: Option<Tensor> = None;
        let mut input = block.clone();
        for (l, hypothesis) in hypotheses.into_iter().enumerate() {
            let out = self.modules[l].observe(&input, hypothesis, &state.levels[l])?;
            let weight = self.config.level_weights[l];
            if weight != 0.0 {
                let term = out.loss.scale(weight);
                loss = Some(match loss {
                    Some(acc) => acc.add(&term)?,
                    None => term,
                });
            }
            let next = if l + 1 < levels {
                Some(pooled_input(&out.state.representation)?)
            } else {
                None
            };
            inputs.push(std::mem::replace(
                &mut input,
                next.unwrap_or_else(|| Tensor::scalar(0.0)),
            ));
            predictions.push(out.prediction);
            level_losses.push(out.loss);
            new_levels.push(out.state);
        }
        Ok(StepOutput {
            state: NetworkState { levels: new_levels },
            inputs,
            predictions,
            level_losses,
            loss: loss.unwrap_or_else(|| Tensor::scalar(0.0)),
        })
    }

    /// One teacher-forced step on `block`.
    pub fn step(&self, state: &NetworkState, block: &Tensor) -> Result<StepOutput> {
        let hypotheses = self.predict(state)?;
        self.observe(state, hypotheses, block)
    }

    /// Teacher-forced pass returning every step's full output.
    pub fn trace(&self, blocks: &[Tensor]) -> Result<Vec<StepOutput>> {
        if blocks.is_empty() {
            return Err(HpnetError::contract("sequence has no blocks"));
        }
        let mut state = self.initial_state();
        let mut steps = Vec::with_capacity(blocks.len());
        for block in blocks {
            let out = self.step(&state, block)?;
            state = out.state.clone();
            steps.push(out);
        }
        Ok(steps)
    }

    /// Teacher-forced pass with the step-weighted total loss.
    pub fn forward_sequence(&self, blocks: &[Tensor]) -> Result<SequenceOutput> {
        if blocks.is_empty() {
            return Err(HpnetError::contract("sequence has no blocks"));
        }
        let steps = blocks.len();
        let mut state = self.initial_state();
        let mut total: Option<Tensor> = None;
        let mut step_losses = Vec::with_capacity(steps);
        let mut predictions = Vec::with_capacity(steps);
        for (k, block) in blocks.iter().enumerate() {
            let out = self.step(&state, block)?;
            step_losses.push(out.loss.item()?);
            let weight = self.config.step_weight(k, steps);
            if weight != 0.0 {
                let term = out.loss.scale(weight);
                total = Some(match total {
                    Some(acc) => acc.add(&term)?,
                    None => term,
                });
            }
            predictions.push(out.predictions[0].clone());
            state = out.state;
        }
        Ok(SequenceOutput {
            loss: total.unwrap_or_else(|| Tensor::scalar(0.0)),
            step_losses,
            predictions,
        })
    }

    /// Teacher-forces `seed_blocks`, then runs closed loop for `n_future`
    /// steps, feeding each bottom-level prediction back as the next input.
    /// Returns the predicted blocks, clipped to `[0, p_max]`.
    pub fn rollout(&self, seed_blocks: &[Tensor], n_future: usize) -> Result<Vec<Tensor>> {
        if seed_blocks.is_empty() {
            return Err(HpnetError::contract("rollout needs at least one seed block"));
        }
        if n_future < 1 {
            return Err(HpnetError::contract("rollout needs at least one future block"));
        }
        let mut state = self.initial_state();
        for block in seed_blocks {
            state = self.step(&state, block)?.state;
        }
        let p_max = self.config.p_max;
        let mut out = Vec::with_capacity(n_future);
        for _ in 0..n_future {
            let hypotheses = self.predict(&state)?;
            let p = &hypotheses[0].prediction;
            let predicted = Tensor::new(p.shape(), p.data().iter().map(|v| v.clamp(0.0, p_max)).collect())?;
            let next = self.closed_loop_input(&state.levels[0].input_prev, &predicted)?;
            state = self.observe(&state, hypotheses, &next)?.state;
            out.push(predicted);
        }
        Ok(out)
    }

    /// Frame-level closed-loop forecast: `seed_frames` are teacher-forced as
    /// blocks of the configured scheme, then `horizon` future frames are
    /// read off the rollout. Block-to-block and frame-to-frame need a whole
    /// number of blocks of seed frames.
    pub fn predict_frames(&self, seed_frames: &[Vec<f64>], horizon: usize) -> Result<Vec<Vec<f64>>> {
        if horizon == 0 {
            return Ok(Vec::new());
        }
        let c = &self.config;
        let (h, w, d) = (c.frame_height, c.frame_width, c.block_depth);
        let plane = h * w;
        let (seeds, n_future) = match c.scheme {
            Scheme::BlockToFrame => (extract_blocks(seed_frames, h, w, d, 1)?, horizon),
            Scheme::BlockToBlock | Scheme::FrameToFrame => {
                if !seed_frames.len().is_multiple_of(d) {
                    return Err(HpnetError::contract(format!(
                        "{} seed frames do not fill whole blocks of {d}",
                        seed_frames.len()
                    )));
                }
                (extract_blocks(seed_frames, h, w, d, d)?, horizon.div_ceil(d))
            }
        };
        let blocks = self.rollout(&seeds, n_future)?;
        let frames: Vec<Vec<f64>> = match c.scheme {
            Scheme::BlockToFrame => blocks.iter().map(|b| b.data()[(d - 1) * plane..].to_vec()).collect(),
            _ => blocks
                .iter()
                .flat_map(|b| b.data().chunks_exact(plane).map(<[f64]>::to_vec).collect::<Vec<_>>())
                .collect(),
        };
        Ok(frames.into_iter().take(horizon).collect())
    }

    /// Input fed back after a prediction: the whole block, or for
    /// block-to-frame the previous block advanced by the predicted last frame.
    fn closed_loop_input(&self, previous: &Tensor, predicted: &Tensor) -> Result<Tensor> {
        match self.config.scheme {
            Scheme::BlockToFrame => {
                let plane = self.config.frame_height * self.config.frame_width;
                let d = self.config.block_depth;
                let mut data = previous.data()[plane..].to_vec();
                data.extend_from_slice(&predicted.data()[(d - 1) * plane..]);
                Ok(Tensor::new(previous.shape(), data)?)
            }
            Scheme::BlockToBlock | Scheme::FrameToFrame => Ok(predicted.detach()),
        }
    }
}
