use hpnet_tensor::{concat_channels, conv3d, sparse_conv3d, ConvKernel3D, Tensor, TensorError};

use super::lstm::ConvLstm3d;
use crate::config::HpnetConfig;
use crate::error::{HpnetError, Result};

/// Persistent per-level state carried from one step to the next.
#[derive(Debug, Clone)]
pub struct CorticalModuleState {
    /// Accumulated feedforward representation.
    pub representation: Tensor,
    pub hidden: Tensor,
    pub cell: Tensor,
    pub error: Tensor,
    /// The input observed on the previous step.
    pub input_prev: Tensor,
}

impl CorticalModuleState {
    pub fn zeros(config: &HpnetConfig, level: usize) -> Self {
        let state = config.state_shape(level);
        let input = config.input_shape(level);
        CorticalModuleState {
            representation: Tensor::zeros(&state),
            hidden: Tensor::zeros(&state),
            cell: Tensor::zeros(&state),
            error: Tensor::zeros(&state),
            input_prev: Tensor::zeros(&input),
        }
    }

    fn check(&self, config: &HpnetConfig, level: usize) -> Result<()> {
        let state = config.state_shape(level);
        for (name, t) in [
            ("representation", &self.representation),
            ("hidden", &self.hidden),
            ("cell", &self.cell),
            ("error", &self.error),
        ] {
            if t.shape() != state {
                return Err(HpnetError::contract(format!(
                    "level {} {name} has shape {:?}, expected {state:?}",
                    level + 1,
                    t.shape()
                )));
            }
        }
        if self.input_prev.shape() != config.input_shape(level) {
            return Err(HpnetError::contract(format!(
                "level {} previous input has shape {:?}, expected {:?}",
                level + 1,
                self.input_prev.shape(),
                config.input_shape(level)
            )));
        }
        Ok(())
    }
}

/// Recurrent update of one level and the prediction it makes.
#[derive(Debug, Clone)]
pub struct Hypothesis {
    pub hidden: Tensor,
    pub cell: Tensor,
    pub prediction: Tensor,
}

/// Result of absorbing one input.
#[derive(Debug, Clone)]
pub struct ModuleOutput {
    pub state: CorticalModuleState,
    pub prediction: Tensor,
    /// Mean squared prediction error.
    pub loss: Tensor,
}

/// Kernels of one level of the hierarchy.
#[derive(Debug, Clone)]
pub struct CorticalModule {
    pub(crate) level: usize,
    pub(crate) feedforward: ConvKernel3D,
    pub(crate) error: ConvKernel3D,
    pub(crate) lstm: ConvLstm3d,
    pub(crate) prediction: ConvKernel3D,
    /// Saturation applied to predictions; only the bottom level saturates.
    pub(crate) saturation: Option<f64>,
}

impl CorticalModule {
    pub fn level(&self) -> usize {
        self.level
    }

    /// Recurrent update from the previous state and the prediction of this
    /// step's input.
    ///
    /// `drive` is the bottom-up signal available before the input arrives;
    /// `above_hidden` is the hidden state of the level above at half
    /// resolution.
    pub fn predict(
        &self,
        drive: &Tensor,
        state: &CorticalModuleState,
        above_hidden: Option<&Tensor>,
    ) -> Result<Hypothesis> {
        let top_down = above_hidden.map(|h| h.upsample_spatial(2)).transpose()?;
        let mut parts = vec![drive, &state.error];
        parts.extend(top_down.as_ref());
        let z = concat_channels(&parts)?;
        if z.shape()[0] + self.lstm.hidden_channels() != self.lstm.gate_input_channels() {
            return Err(TensorError::Dimension {
                op: "module recurrent input",
                lhs: z.shape().to_vec(),
                rhs: vec![self.lstm.gate_input_channels() - self.lstm.hidden_channels()],
            }
            .into());
        }
        let (hidden, cell) = self.lstm.step(&z, &state.hidden, &state.cell)?;
        let mut prediction = conv3d(&hidden, &self.prediction)?.relu();
        if let Some(p_max) = self.saturation {
            prediction = prediction.satlu(p_max);
        }
        Ok(Hypothesis {
            hidden,
            cell,
            prediction,
        })
    }

    /// Absorbs the actual input: accumulates the representation from the
    /// input change, computes the error against the hypothesis and the loss.
    pub fn observe(&self, input: &Tensor, hypothesis: Hypothesis, state: &CorticalModuleState) -> Result<ModuleOutput> {
        if input.shape() != state.input_prev.shape() {
            return Err(TensorError::Dimension {
                op: "module input",
                lhs: input.shape().to_vec(),
                rhs: state.input_prev.shape().to_vec(),
            }
            .into());
        }
        let delta = sparse_conv3d(&input.sub(&state.input_prev)?, &self.feedforward)?;
        let representation = state.representation.add(&delta)?;
        let residual = input.sub(&hypothesis.prediction)?;
        let error = sparse_conv3d(&residual, &self.error)?;
        let loss = residual.hadamard(&residual)?.mean();
        Ok(ModuleOutput {
            state: CorticalModuleState {
                representation,
                hidden: hypothesis.hidden,
                cell: hypothesis.cell,
                error,
                input_prev: input.clone(),
            },
            prediction: hypothesis.prediction,
            loss,
        })
    }

    /// One full update of a level in isolation: predict, then observe `input`.
    pub fn step(
        &self,
        config: &HpnetConfig,
        input: &Tensor,
        drive: &Tensor,
        above_hidden: Option<&Tensor>,
        state: &CorticalModuleState,
    ) -> Result<ModuleOutput> {
        state.check(config, self.level)?;
        let hypothesis = self.predict(drive, state, above_hidden)?;
        self.observe(input, hypothesis, state)
    }
}

/// Bottom-up drive a level receives from the level below:
/// max-pooled rectified representation and error.
pub fn pooled_drive(below: &CorticalModuleState) -> Result<Tensor> {
    Ok(concat_channels(&[&below.representation, &below.error])?
        .relu()
        .maxpool_spatial(2)?)
}

/// Input a level predicts: the max-pooled rectified representation below.
pub fn pooled_input(below_representation: &Tensor) -> Result<Tensor> {
    Ok(below_representation.relu().maxpool_spatial(2)?)
}

pub(crate) fn check_state(state: &CorticalModuleState, config: &HpnetConfig, level: usize) -> Result<()> {
    state.check(config, level)
}
