use rand::seq::index::sample;
use rand::Rng;

use crate::numerics::{dropout_mask, init_weights, DenseMatrix, OptimizerConfig, OptimizerState};
use crate::seed::{derive_rng, Rng as SeededRng};
use crate::{Error, Result};

use super::model::{distinct_head_kinds, plain_squared_heads, AutoencoderModel, Hyperparams, LayerParams, OutputHead};
use super::network::{backward, forward, masked_loss, DropoutMasks, LossBreakdown};

struct TrainConfig<'a> {
    epochs: usize,
    batch_size: usize,
    optimizer: OptimizerConfig,
    l2_lambda: f64,
    /// Removal probability per encoder-layer input.
    dropout: &'a [f64],
    /// Fraction of inputs zeroed per sample (masking noise).
    noise: f64,
}

/// Optimizer state for every trainable tensor of a model.
struct ModelOptimizer {
    enc_w: Vec<OptimizerState>,
    enc_b: Vec<OptimizerState>,
    dec_b: Vec<OptimizerState>,
    untied: Option<OptimizerState>,
}

impl ModelOptimizer {
    fn new(model: &AutoencoderModel, config: OptimizerConfig) -> Result<Self> {
        Ok(Self {
            enc_w: model
                .encoder
                .iter()
                .map(|l| OptimizerState::for_params(config, &l.weights))
                .collect::<Result<_>>()?,
            enc_b: model
                .encoder
                .iter()
                .map(|l| OptimizerState::new(config, 1, l.bias.len()))
                .collect::<Result<_>>()?,
            dec_b: model
                .decoder_biases
                .iter()
                .map(|b| OptimizerState::new(config, 1, b.len()))
                .collect::<Result<_>>()?,
            untied: model
                .untied_final
                .as_ref()
                .map(|u| OptimizerState::for_params(config, u))
                .transpose()?,
        })
    }
}

fn apply_masking_noise<R: Rng + ?Sized>(batch: &mut DenseMatrix, fraction: f64, rng: &mut R) {
    let width = batch.cols();
    let count = (fraction * width as f64).floor() as usize;
    if count == 0 {
        return;
    }
    for r in 0..batch.rows() {
        let row = batch.row_mut(r);
        for i in sample(rng, width, count) {
            row[i] = 0.0;
        }
    }
}

fn gather_mask(mask: &[bool], width: usize, rows: &[usize]) -> Vec<bool> {
    let mut out = Vec::with_capacity(rows.len() * width);
    for &r in rows {
        out.extend_from_slice(&mask[r * width..(r + 1) * width]);
    }
    out
}

/// Mini-batch training on reconstruction of `data`; returns per-epoch loss.
fn train_network(
    model: &mut AutoencoderModel,
    data: &DenseMatrix,
    known: Option<&[bool]>,
    cfg: &TrainConfig<'_>,
    rng: &mut SeededRng,
) -> Result<Vec<f64>> {
    let n = data.rows();
    let width = data.cols();
    let mut opt = ModelOptimizer::new(model, cfg.optimizer)?;
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), rng);
        let mut weighted = 0.0;
        let mut active = 0usize;
        for (batch_idx, rows) in order.chunks(cfg.batch_size).enumerate() {
            let targets = data.select_rows(rows);
            let batch_known = known.map(|k| gather_mask(k, width, rows));
            let mut inputs = targets.clone();
            apply_masking_noise(&mut inputs, cfg.noise, rng);

            let masks = if cfg.dropout.iter().any(|&p| p > 0.0) {
                let mut masks = Vec::with_capacity(model.depth());
                for (k, &p) in cfg.dropout.iter().enumerate().take(model.depth()) {
                    masks.push(if p > 0.0 {
                        Some(dropout_mask(rows.len(), model.encoder[k].input_width(), 1.0 - p, rng)?)
                    } else {
                        None
                    });
                }
                Some(DropoutMasks(masks))
            } else {
                None
            };

            let pass = forward(model, &inputs, masks.as_ref())?;
            let weights = model.weight_matrices();
            let (loss, grad_logits) =
                masked_loss(pass.logits(), &targets, batch_known.as_deref(), &model.heads, cfg.l2_lambda, &weights)?;
            if !loss.total.is_finite() {
                return Err(Error::Divergence { epoch, batch: batch_idx });
            }
            let grads = backward(model, &pass, &grad_logits, cfg.l2_lambda)?;

            for (k, layer) in model.encoder.iter_mut().enumerate() {
                opt.enc_w[k].step(&mut layer.weights, &grads.encoder_weights[k])?;
                opt.enc_b[k].step_slice(&mut layer.bias, &grads.encoder_biases[k])?;
            }
            for (k, b) in model.decoder_biases.iter_mut().enumerate() {
                opt.dec_b[k].step_slice(b, &grads.decoder_biases[k])?;
            }
            if let (Some(u), Some(state), Some(g)) = (model.untied_final.as_mut(), opt.untied.as_mut(), grads.untied_final.as_ref()) {
                state.step(u, g)?;
            }
            if !model.encoder.iter().all(|l| l.weights.is_finite()) {
                return Err(Error::Divergence { epoch, batch: batch_idx });
            }

            weighted += loss.total * loss.active_samples as f64;
            active += loss.active_samples;
        }
        history.push(if active > 0 { weighted / active as f64 } else { 0.0 });
    }
    Ok(history)
}

fn optimizer_config(hp: &Hyperparams) -> OptimizerConfig {
    OptimizerConfig::new(hp.optimizer, hp.learning_rate)
}

/// Trains one tied-weight single-hidden-layer denoising autoencoder on
/// `input` and returns its encoder layer.
///
/// With a `known` mask the reconstruction loss only counts observed entries;
/// `heads` selects squared or cross-entropy loss per output block.
pub fn pretrain_layer(
    input: &DenseMatrix,
    known: Option<&[bool]>,
    hidden_width: usize,
    hp: &Hyperparams,
    heads: &[OutputHead],
    rng: &mut SeededRng,
) -> Result<LayerParams> {
    let d = input.cols();
    if hidden_width == 0 {
        return Err(Error::InvalidArgument("hidden width must be positive".into()));
    }
    if hidden_width >= d && hp.pretrain_noise_fraction == 0.0 {
        return Err(Error::InvalidArgument(format!(
            "hidden width {hidden_width} >= input width {d} without masking noise would learn the identity"
        )));
    }
    if !input.is_finite() {
        return Err(Error::InvalidArgument("pre-training input contains non-finite values".into()));
    }
    let mut model = AutoencoderModel {
        encoder: vec![LayerParams {
            weights: init_weights(d, hidden_width, rng)?,
            bias: vec![0.0; hidden_width],
            activation: hp.hidden_activation,
        }],
        decoder_biases: vec![vec![0.0; d]],
        heads: heads.to_vec(),
        untied_final: None,
        hidden_activation: hp.hidden_activation,
    };
    model.validate_structure()?;
    let cfg = TrainConfig {
        epochs: hp.pretrain_epochs,
        batch_size: hp.batch_size,
        optimizer: optimizer_config(hp),
        l2_lambda: hp.l2_lambda,
        dropout: &[],
        noise: hp.pretrain_noise_fraction,
    };
    train_network(&mut model, input, known, &cfg, rng)?;
    Ok(model.encoder.pop().expect("one layer"))
}

/// Greedy layer-wise pre-training of the whole encoder. The first layer uses
/// the masked mixed-type loss; deeper layers reconstruct the (complete)
/// hidden representation below them with a plain squared loss.
pub fn pretrain_encoder(
    data: &DenseMatrix,
    known: &[bool],
    heads: &[OutputHead],
    hp: &Hyperparams,
) -> Result<Vec<LayerParams>> {
    hp.validate()?;
    let mut rng = derive_rng(hp.seed, "pretrain", 0);
    let mut layers: Vec<LayerParams> = Vec::with_capacity(hp.encoder_sizes.len());
    let mut rep: Option<DenseMatrix> = None;
    for &width in &hp.encoder_sizes {
        let layer = match &rep {
            None => pretrain_layer(data, Some(known), width, hp, heads, &mut rng)?,
            Some(h) => pretrain_layer(h, None, width, hp, &plain_squared_heads(h.cols()), &mut rng)?,
        };
        rep = Some(layer.forward(rep.as_ref().unwrap_or(data))?);
        layers.push(layer);
    }
    Ok(layers)
}

/// Glorot-initialised encoder without pre-training.
pub fn random_encoder(input_width: usize, hp: &Hyperparams) -> Result<Vec<LayerParams>> {
    hp.validate()?;
    let mut rng = derive_rng(hp.seed, "pretrain", 0);
    let mut fan_in = input_width;
    hp.encoder_sizes
        .iter()
        .map(|&w| {
            let layer = LayerParams {
                weights: init_weights(fan_in, w, &mut rng)?,
                bias: vec![0.0; w],
                activation: hp.hidden_activation,
            };
            fan_in = w;
            Ok(layer)
        })
        .collect()
}

/// Builds the full autoencoder: the decoder mirrors the encoder through
/// transposed (shared) weights and gets freshly drawn biases. With more than
/// one head kind the final decoder layer gets its own Glorot-initialised
/// matrix.
pub fn stack_and_mirror<R: Rng + ?Sized>(
    encoder: Vec<LayerParams>,
    heads: Vec<OutputHead>,
    rng: &mut R,
) -> Result<AutoencoderModel> {
    let Some(first) = encoder.first() else {
        return Err(Error::InvalidArgument("encoder has no layers".into()));
    };
    let hidden_activation = first.activation;
    let l = encoder.len();
    let decoder_biases = (0..l)
        .map(|layer| {
            let src = &encoder[l - 1 - layer];
            let bound = 1.0 / (src.output_width() as f64).sqrt();
            (0..src.input_width()).map(|_| rng.random_range(-bound..=bound)).collect()
        })
        .collect();
    let untied_final = if distinct_head_kinds(&heads) > 1 {
        Some(init_weights(first.output_width(), first.input_width(), rng)?)
    } else {
        None
    };
    let model = AutoencoderModel {
        encoder,
        decoder_biases,
        heads,
        untied_final,
        hidden_activation,
    };
    model.validate()?;
    Ok(model)
}

/// End-to-end fine-tuning with dropout on encoder inputs; returns the
/// per-epoch training loss.
pub fn finetune(model: &mut AutoencoderModel, data: &DenseMatrix, known: &[bool], hp: &Hyperparams) -> Result<Vec<f64>> {
    hp.validate()?;
    if data.cols() != model.input_width() {
        return Err(Error::Shape(format!(
            "data has {} columns, model expects {}",
            data.cols(),
            model.input_width()
        )));
    }
    let cfg = TrainConfig {
        epochs: hp.finetune_epochs,
        batch_size: hp.batch_size,
        optimizer: optimizer_config(hp),
        l2_lambda: hp.l2_lambda,
        dropout: &hp.dropout_probs,
        noise: 0.0,
    };
    let mut rng = derive_rng(hp.seed, "finetune", 0);
    train_network(model, data, Some(known), &cfg, &mut rng)
}

/// Loss of the model on `data` without dropout.
pub fn training_loss(model: &AutoencoderModel, data: &DenseMatrix, known: &[bool], l2_lambda: f64) -> Result<LossBreakdown> {
    let pass = forward(model, data, None)?;
    let weights = model.weight_matrices();
    Ok(masked_loss(pass.logits(), data, Some(known), &model.heads, l2_lambda, &weights)?.0)
}
