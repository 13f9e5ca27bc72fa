use hpnet_tensor::TensorError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, HpnetError>;

#[derive(Debug, Error)]
pub enum HpnetError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid configuration `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error("contract violated: {0}")]
    Contract(String),
    /// Malformed dataset or checkpoint file.
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("training diverged in epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("undefined result: {0}")]
    Undefined(String),
}

impl HpnetError {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        HpnetError::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        HpnetError::Contract(msg.into())
    }

    pub(crate) fn format(offset: u64, reason: impl Into<String>) -> Self {
        HpnetError::Format {
            offset,
            reason: reason.into(),
        }
    }
}
