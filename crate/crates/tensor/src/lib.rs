//! Dense `f64` tensors with define-by-run reverse-mode differentiation.
//!
//! Provides the numeric primitives of a hierarchical video-prediction network:
//! "same"-padded 3D convolution (dense and sparse-input), spatial max-pooling
//! and nearest-neighbour upsampling, the usual activations plus a saturating
//! linear unit, elementwise arithmetic and channel concatenation.
//!
//! ```
//! use hpnet_tensor::Tensor;
//!
//! let x = Tensor::variable(&[3], vec![1.0, -2.0, 0.5]).unwrap();
//! let loss = x.hadamard(&x).unwrap().sum();
//! loss.backward().unwrap();
//! assert_eq!(x.grad().unwrap(), vec![2.0, -4.0, 1.0]);
//! ```

mod error;
mod gradcheck;
pub mod ops;
mod tensor;

pub use error::{Result, TensorError};
pub use gradcheck::grad_check;
pub use ops::conv::ConvGeometry;
pub use ops::{concat_channels, conv3d, sparse_conv3d, ConvKernel3D};
pub use tensor::Tensor;
