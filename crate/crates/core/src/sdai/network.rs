//! Forward pass, masked mixed-type loss and exact backpropagation.

use crate::numerics::activation::{sigmoid, softmax_in_place};
use crate::numerics::{activation_derivative, apply_activation, DenseMatrix};
use crate::{Error, Result};

use super::model::{AutoencoderModel, HeadKind, OutputHead};

/// Dropout masks for the input of each encoder layer; `None` skips a layer.
#[derive(Debug, Clone, Default)]
pub struct DropoutMasks(pub Vec<Option<DenseMatrix>>);

/// Cached activations of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Input of every layer (`2L` entries), after dropout where applied.
    inputs: Vec<DenseMatrix>,
    /// Pre-activation of every layer.
    pre: Vec<DenseMatrix>,
    /// Masks applied to encoder layer inputs.
    dropout: Vec<Option<DenseMatrix>>,
    output: DenseMatrix,
}

impl ForwardPass {
    /// Head outputs (reconstruction).
    pub fn output(&self) -> &DenseMatrix {
        &self.output
    }

    /// Output-layer pre-activations.
    pub fn logits(&self) -> &DenseMatrix {
        self.pre.last().expect("non-empty network")
    }

    pub fn bottleneck(&self) -> &DenseMatrix {
        // input of the first decoder layer
        &self.inputs[self.inputs.len() / 2]
    }
}

pub(crate) fn apply_heads(logits: &DenseMatrix, heads: &[OutputHead]) -> DenseMatrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        for h in heads {
            let block = &mut row[h.range.clone()];
            match h.kind {
                HeadKind::Linear => {}
                HeadKind::Sigmoid => block.iter_mut().for_each(|v| *v = sigmoid(*v)),
                HeadKind::Softmax => softmax_in_place(block),
            }
        }
    }
    out
}

pub fn forward(model: &AutoencoderModel, batch: &DenseMatrix, dropout: Option<&DropoutMasks>) -> Result<ForwardPass> {
    if batch.cols() != model.input_width() {
        return Err(Error::Shape(format!(
            "batch has {} columns, model expects {}",
            batch.cols(),
            model.input_width()
        )));
    }
    let l = model.depth();
    let mut inputs = Vec::with_capacity(2 * l);
    let mut pre = Vec::with_capacity(2 * l);
    let mut masks = Vec::with_capacity(l);
    let mut current = batch.clone();

    for (k, layer) in model.encoder.iter().enumerate() {
        let mask = dropout.and_then(|d| d.0.get(k).cloned().flatten());
        if let Some(m) = &mask {
            current.hadamard_assign(m)?;
        }
        masks.push(mask);
        let mut z = current.matmul_t(&layer.weights)?;
        z.add_row_broadcast(&layer.bias)?;
        let next = apply_activation(model.hidden_activation, &z, None)?;
        inputs.push(std::mem::replace(&mut current, next));
        pre.push(z);
    }

    for layer in 0..l {
        let mut z = match model.tied_source(layer) {
            Some(k) => current.matmul(&model.encoder[k].weights)?,
            None => current.matmul_t(model.untied_final.as_ref().expect("untied final"))?,
        };
        z.add_row_broadcast(&model.decoder_biases[layer])?;
        let next = if layer + 1 == l {
            apply_heads(&z, &model.heads)
        } else {
            apply_activation(model.hidden_activation, &z, None)?
        };
        inputs.push(std::mem::replace(&mut current, next));
        pre.push(z);
    }

    Ok(ForwardPass {
        inputs,
        pre,
        dropout: masks,
        output: current,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    /// Squared error over known continuous entries.
    pub squared: f64,
    pub cross_entropy_binary: f64,
    pub cross_entropy_categorical: f64,
    pub l2_penalty: f64,
    pub total: f64,
    pub known_continuous: usize,
    pub known_binary: usize,
    pub known_categorical: usize,
    /// Samples with at least one known entry (the averaging denominator).
    pub active_samples: usize,
}

#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Masked reconstruction loss and its gradient with respect to the
/// output-layer pre-activations.
///
/// Losses are summed over known entries within a sample and averaged over
/// samples that have at least one known entry. Entries with `known = false`
/// contribute nothing to either the loss or the gradient. `known = None`
/// treats every entry as observed. The L2 term `λ Σ‖W‖²` covers `weights`.
pub fn masked_loss(
    logits: &DenseMatrix,
    targets: &DenseMatrix,
    known: Option<&[bool]>,
    heads: &[OutputHead],
    l2_lambda: f64,
    weights: &[&DenseMatrix],
) -> Result<(LossBreakdown, DenseMatrix)> {
    if !logits.same_shape(targets) {
        return Err(Error::Shape(format!(
            "logits {:?} vs targets {:?}",
            logits.shape(),
            targets.shape()
        )));
    }
    let (n, width) = logits.shape();
    if let Some(k) = known {
        if k.len() != n * width {
            return Err(Error::Shape(format!("known mask has {} entries, expected {}", k.len(), n * width)));
        }
    }
    let is_known = |r: usize, c: usize| known.is_none_or(|k| k[r * width + c]);

    let active: Vec<bool> = (0..n).map(|r| (0..width).any(|c| is_known(r, c))).collect();
    let active_samples = active.iter().filter(|&&a| a).count();
    let mut out = LossBreakdown {
        active_samples,
        ..LossBreakdown::default()
    };
    let mut grad = DenseMatrix::zeros(n, width);
    let inv_n = if active_samples > 0 { 1.0 / active_samples as f64 } else { 0.0 };

    let mut probs = Vec::new();
    for r in 0..n {
        if !active[r] {
            continue;
        }
        let z = logits.row(r);
        let t = targets.row(r);
        let g = grad.row_mut(r);
        for h in heads {
            match h.kind {
                HeadKind::Linear => {
                    for c in h.range.clone() {
                        if is_known(r, c) {
                            let d = z[c] - t[c];
                            out.squared += d * d;
                            out.known_continuous += 1;
                            g[c] = 2.0 * d * inv_n;
                        }
                    }
                }
                HeadKind::Sigmoid => {
                    for c in h.range.clone() {
                        if is_known(r, c) {
                            out.cross_entropy_binary += softplus(z[c]) - t[c] * z[c];
                            out.known_binary += 1;
                            g[c] = (sigmoid(z[c]) - t[c]) * inv_n;
                        }
                    }
                }
                HeadKind::Softmax => {
                    if !h.range.clone().all(|c| is_known(r, c)) {
                        continue;
                    }
                    let tb = &t[h.range.clone()];
                    let sum: f64 = tb.iter().sum();
                    if (sum - 1.0).abs() > 1e-9 || tb.iter().any(|v| *v < 0.0) {
                        return Err(Error::InvalidArgument(format!(
                            "softmax targets in row {r}, columns {:?} sum to {sum}",
                            h.range
                        )));
                    }
                    let zb = &z[h.range.clone()];
                    let max = zb.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let lse = max + zb.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                    out.cross_entropy_categorical += lse - tb.iter().zip(zb).map(|(a, b)| a * b).sum::<f64>();
                    out.known_categorical += 1;
                    probs.clear();
                    probs.extend_from_slice(zb);
                    softmax_in_place(&mut probs);
                    for (i, c) in h.range.clone().enumerate() {
                        g[c] = (probs[i] - tb[i]) * inv_n;
                    }
                }
            }
        }
    }
    out.squared *= inv_n;
    out.cross_entropy_binary *= inv_n;
    out.cross_entropy_categorical *= inv_n;
    out.l2_penalty = l2_lambda * weights.iter().map(|w| w.sum_squares()).sum::<f64>();
    out.total = out.squared + out.cross_entropy_binary + out.cross_entropy_categorical + out.l2_penalty;
    Ok((out, grad))
}

/// Parameter gradients, laid out like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub encoder_weights: Vec<DenseMatrix>,
    pub encoder_biases: Vec<Vec<f64>>,
    pub decoder_biases: Vec<Vec<f64>>,
    pub untied_final: Option<DenseMatrix>,
}

/// Backpropagates `grad_logits` (from [`masked_loss`]) and adds the L2 term.
/// Tied matrices accumulate both their encoder-side and decoder-side
/// contributions.
pub fn backward(model: &AutoencoderModel, pass: &ForwardPass, grad_logits: &DenseMatrix, l2_lambda: f64) -> Result<Gradients> {
    let l = model.depth();
    let mut enc_w: Vec<DenseMatrix> = model
        .encoder
        .iter()
        .map(|layer| {
            let mut g = layer.weights.clone();
            g.scale(2.0 * l2_lambda);
            g
        })
        .collect();
    let mut enc_b = vec![Vec::new(); l];
    let mut dec_b = vec![Vec::new(); l];
    let mut untied = model.untied_final.as_ref().map(|u| {
        let mut g = u.clone();
        g.scale(2.0 * l2_lambda);
        g
    });

    let mut delta = grad_logits.clone();
    for layer in (0..l).rev() {
        let idx = l + layer;
        let input = &pass.inputs[idx];
        dec_b[layer] = delta.column_sums();
        let d_input = match model.tied_source(layer) {
            Some(k) => {
                // z = x · W_k
                enc_w[k].add_scaled(&input.t_matmul(&delta)?, 1.0)?;
                delta.matmul_t(&model.encoder[k].weights)?
            }
            None => {
                let u = untied.as_mut().expect("untied final");
                u.add_scaled(&delta.t_matmul(input)?, 1.0)?;
                delta.matmul(model.untied_final.as_ref().expect("untied final"))?
            }
        };
        // input of decoder layer `layer` is the activation of layer idx - 1
        let mut d = d_input;
        d.hadamard_assign(&activation_derivative(model.hidden_activation, &pass.pre[idx - 1])?)?;
        delta = d;
    }

    for k in (0..l).rev() {
        let input = &pass.inputs[k];
        enc_b[k] = delta.column_sums();
        enc_w[k].add_scaled(&delta.t_matmul(input)?, 1.0)?;
        if k == 0 {
            break;
        }
        let mut d = delta.matmul(&model.encoder[k].weights)?;
        if let Some(m) = &pass.dropout[k] {
            d.hadamard_assign(m)?;
        }
        d.hadamard_assign(&activation_derivative(model.hidden_activation, &pass.pre[k - 1])?)?;
        delta = d;
    }

    Ok(Gradients {
        encoder_weights: enc_w,
        encoder_biases: enc_b,
        decoder_biases: dec_b,
        untied_final: untied,
    })
}
