//! Missing-data imputation with stacked denoising autoencoders.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: dense matrices, activations, initialisers, dropout and
//!   optimizer update rules.
//! - [`data`]: schema-aware mixed-type tables, one-hot encoding and
//!   standardisation, mean-fill, decoding, and the shifted-sine generator.
//! - [`corruption`]: gold-standard missingness (MCAR cells, image lines,
//!   Ising-like spatial masks).
//! - [`sdai`]: layer-wise denoising pre-training, tied-weight mirroring,
//!   masked mixed-type fine-tuning and imputation.
//! - [`baselines`]: mean and distance-weighted K-nearest-neighbour imputers.
//! - [`eval`]: metrics, statistical tests, k-fold splitting, random search and
//!   the nested cross-validation benchmark.
//! - [`artifact`]: versioned model files.

pub mod artifact;
pub mod baselines;
pub mod corruption;
pub mod data;
mod error;
pub mod eval;
pub mod numerics;
pub mod sdai;
pub mod seed;

pub use error::{Error, Result};
