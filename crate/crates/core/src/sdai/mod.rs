//! Stacked denoising autoencoder for imputation.
//!
//! Training runs in two phases. Each encoder layer is first pre-trained as a
//! single-hidden-layer tied-weight autoencoder under masking noise; the
//! trained encoder is then stacked and mirrored into a full autoencoder whose
//! decoder reuses the transposed encoder weights, and the whole network is
//! fine-tuned with a loss that only counts observed entries. Mixed-type data
//! gets one output head per variable kind (linear / sigmoid / softmax) with a
//! squared or cross-entropy loss per head.

mod model;
mod network;
mod pipeline;
mod train;

pub use model::{
    heads_for_blocks, plain_squared_heads, AutoencoderModel, HeadKind, Hyperparams, LayerParams,
    OutputHead,
};
pub use network::{backward, forward, masked_loss, DropoutMasks, ForwardPass, Gradients, LossBreakdown};
pub use pipeline::{build_model, fit, fit_with, impute, FitOptions, SdaiModel};
pub use train::{finetune, pretrain_encoder, pretrain_layer, random_encoder, stack_and_mirror, training_loss};
