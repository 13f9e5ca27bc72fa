//! The hierarchy of cortical modules and its sequence-level drivers.
//!
//! Each step runs two passes. A top-down pass updates every level's
//! recurrent unit from the previous step's state (bottom-up drive and error)
//! and the freshly updated hidden state of the level above, and emits a
//! prediction of the level's next input. A bottom-up pass then observes the
//! actual input: the representation accumulates the sparse convolution of
//! the input change, the error is the sparse convolution of the prediction
//! residual, and the rectified, pooled representation becomes the next
//! level's input.

mod check;
mod lstm;
mod module;
mod network;

pub use check::{sequence_grad_check, step_grad_check};
pub use lstm::{lstm3d_step, ConvLstm3d};
pub use module::{pooled_drive, pooled_input, CorticalModule, CorticalModuleState, Hypothesis, ModuleOutput};
pub use network::{Network, NetworkState, SequenceOutput, StepOutput};
