//! Dense linear algebra and optimisation substrate.

pub(crate) mod activation;
mod init;
mod matrix;
mod optim;

pub use activation::{activation_derivative, apply_activation, ActivationKind};
pub use init::{dropout_mask, init_weights};
pub use matrix::DenseMatrix;
pub use optim::{OptimizerConfig, OptimizerKind, OptimizerState};
