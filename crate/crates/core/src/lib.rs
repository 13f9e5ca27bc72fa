pub mod cli;
pub mod config;
pub mod data;
pub mod dataset;
pub mod error;
mod io;
pub mod metrics;
pub mod model;
pub mod neurophys;
pub mod parallel;
pub mod params;
pub mod pgm;
pub mod train;

pub use config::{HpnetConfig, Scheme};
pub use data::{MovementClass, Sequence, SequenceSpec};
pub use error::{HpnetError, Result};
pub use model::{Network, NetworkState};
pub use params::ParamStore;
pub use train::{Checkpoint, TrainOptions, TrainRecord, Trainer};
