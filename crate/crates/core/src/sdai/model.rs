use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::data::{Block, BlockKind};
use crate::numerics::{ActivationKind, DenseMatrix, OptimizerKind};
use crate::{Error, Result};

/// One affine layer followed by an activation: `h' = f(W h + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    /// Shape `out × in`.
    pub weights: DenseMatrix,
    pub bias: Vec<f64>,
    pub activation: ActivationKind,
}

impl LayerParams {
    pub fn input_width(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_width(&self) -> usize {
        self.weights.rows()
    }

    /// Applies the layer to a batch (one sample per row).
    pub fn forward(&self, input: &DenseMatrix) -> Result<DenseMatrix> {
        let mut pre = input.matmul_t(&self.weights)?;
        pre.add_row_broadcast(&self.bias)?;
        crate::numerics::apply_activation(self.activation, &pre, None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    /// Identity output, squared loss.
    Linear,
    /// Logistic output, binary cross-entropy.
    Sigmoid,
    /// Softmax over the head's range, categorical cross-entropy.
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputHead {
    pub range: Range<usize>,
    pub kind: HeadKind,
}

/// Output heads matching an encoded layout. Runs of adjacent continuous (or
/// binary) blocks share one head; every categorical block gets its own
/// softmax head.
pub fn heads_for_blocks(blocks: &[Block]) -> Vec<OutputHead> {
    let mut heads: Vec<OutputHead> = Vec::new();
    for block in blocks {
        let kind = match block.kind {
            BlockKind::Continuous => HeadKind::Linear,
            BlockKind::Binary => HeadKind::Sigmoid,
            BlockKind::Categorical => HeadKind::Softmax,
        };
        match heads.last_mut() {
            Some(last) if last.kind == kind && kind != HeadKind::Softmax && last.range.end == block.range.start => {
                last.range.end = block.range.end;
            }
            _ => heads.push(OutputHead {
                range: block.range.clone(),
                kind,
            }),
        }
    }
    heads
}

/// A single linear head over `width` entries.
pub fn plain_squared_heads(width: usize) -> Vec<OutputHead> {
    vec![OutputHead {
        range: 0..width,
        kind: HeadKind::Linear,
    }]
}

pub(crate) fn check_heads(heads: &[OutputHead], width: usize) -> Result<()> {
    let mut expected = 0;
    for h in heads {
        if h.range.start != expected || h.range.is_empty() {
            return Err(Error::Shape(format!(
                "output heads must partition 0..{width} in order; found {:?}",
                h.range
            )));
        }
        expected = h.range.end;
    }
    if expected != width {
        return Err(Error::Shape(format!("output heads cover 0..{expected}, input width is {width}")));
    }
    Ok(())
}

pub(crate) fn distinct_head_kinds(heads: &[OutputHead]) -> usize {
    let mut kinds: Vec<HeadKind> = heads.iter().map(|h| h.kind).collect();
    kinds.sort_by_key(|k| *k as u8);
    kinds.dedup();
    kinds.len()
}

/// Encoder stack with a mirrored, weight-tied decoder.
///
/// Decoder layer `ℓ` (0-based, counted from the bottleneck outwards) reads the
/// transpose of encoder layer `L − 1 − ℓ`. The weights have a single storage,
/// so encoder and decoder cannot drift apart. When the output mixes several
/// head kinds, the final decoder layer owns a separate matrix instead.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    pub encoder: Vec<LayerParams>,
    pub decoder_biases: Vec<Vec<f64>>,
    pub heads: Vec<OutputHead>,
    /// Shape `input_width × encoder[0].output_width`; present iff the final
    /// decoder layer is untied.
    pub untied_final: Option<DenseMatrix>,
    pub hidden_activation: ActivationKind,
}

impl AutoencoderModel {
    pub fn depth(&self) -> usize {
        self.encoder.len()
    }

    pub fn input_width(&self) -> usize {
        self.encoder[0].input_width()
    }

    pub fn bottleneck_width(&self) -> usize {
        self.encoder[self.depth() - 1].output_width()
    }

    pub fn tied_final_layer(&self) -> bool {
        self.untied_final.is_none()
    }

    /// Encoder layer whose transpose serves as decoder layer `layer`, if tied.
    pub fn tied_source(&self, layer: usize) -> Option<usize> {
        let l = self.depth();
        if layer + 1 == l && self.untied_final.is_some() {
            None
        } else {
            Some(l - 1 - layer)
        }
    }

    /// Entry `(row, col)` of decoder layer `layer`'s weight matrix.
    pub fn decoder_weight(&self, layer: usize, row: usize, col: usize) -> f64 {
        match self.tied_source(layer) {
            Some(k) => self.encoder[k].weights.get(col, row),
            None => self.untied_final.as_ref().expect("untied final").get(row, col),
        }
    }

    /// Writes decoder weight `(row, col)`; for tied layers this is the
    /// encoder weight `(col, row)`.
    pub fn set_decoder_weight(&mut self, layer: usize, row: usize, col: usize, value: f64) {
        match self.tied_source(layer) {
            Some(k) => self.encoder[k].weights.set(col, row, value),
            None => self.untied_final.as_mut().expect("untied final").set(row, col, value),
        }
    }

    /// Weight matrices that carry the L2 penalty.
    pub fn weight_matrices(&self) -> Vec<&DenseMatrix> {
        self.encoder
            .iter()
            .map(|l| &l.weights)
            .chain(self.untied_final.as_ref())
            .collect()
    }

    /// Checks shapes, heads and the bottleneck constraint.
    pub fn validate(&self) -> Result<()> {
        self.validate_structure()?;
        if self.bottleneck_width() >= self.input_width() {
            return Err(Error::InvalidArgument(format!(
                "bottleneck width {} must be below input width {}",
                self.bottleneck_width(),
                self.input_width()
            )));
        }
        Ok(())
    }

    /// Structural checks only; single-layer pre-training networks may be
    /// wider than their input.
    pub(crate) fn validate_structure(&self) -> Result<()> {
        if self.encoder.is_empty() {
            return Err(Error::InvalidArgument("encoder has no layers".into()));
        }
        if !self.hidden_activation.is_hidden_capable() {
            return Err(Error::InvalidArgument("softmax cannot be a hidden activation".into()));
        }
        for (i, layer) in self.encoder.iter().enumerate() {
            if layer.bias.len() != layer.output_width() {
                return Err(Error::Shape(format!("encoder layer {i} bias length")));
            }
            if i > 0 && self.encoder[i - 1].output_width() != layer.input_width() {
                return Err(Error::Shape(format!(
                    "encoder layer {i} expects {} inputs, previous layer emits {}",
                    layer.input_width(),
                    self.encoder[i - 1].output_width()
                )));
            }
        }
        let l = self.depth();
        if self.decoder_biases.len() != l {
            return Err(Error::Shape(format!("{} decoder biases for depth {l}", self.decoder_biases.len())));
        }
        for (layer, b) in self.decoder_biases.iter().enumerate() {
            let want = self.encoder[l - 1 - layer].input_width();
            if b.len() != want {
                return Err(Error::Shape(format!("decoder layer {layer} bias has {} entries, expected {want}", b.len())));
            }
        }
        if let Some(u) = &self.untied_final {
            if u.shape() != (self.input_width(), self.encoder[0].output_width()) {
                return Err(Error::Shape(format!("untied final layer has shape {:?}", u.shape())));
            }
        }
        check_heads(&self.heads, self.input_width())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// Hidden widths, input side first; the last entry is the bottleneck.
    pub encoder_sizes: Vec<usize>,
    /// Removal probability for the input of each encoder layer (entry 0 is
    /// input dropout).
    pub dropout_probs: Vec<f64>,
    pub l2_lambda: f64,
    /// Fraction of inputs zeroed per sample during pre-training.
    pub pretrain_noise_fraction: f64,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub batch_size: usize,
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
    pub hidden_activation: ActivationKind,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            encoder_sizes: vec![100, 8],
            dropout_probs: vec![0.3, 0.1],
            l2_lambda: 1e-4,
            pretrain_noise_fraction: 0.2,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            batch_size: 32,
            pretrain_epochs: 10,
            finetune_epochs: 50,
            hidden_activation: ActivationKind::Tanh,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.encoder_sizes.is_empty() || self.encoder_sizes.contains(&0) {
            return bad(format!("encoder_sizes must be non-empty and positive: {:?}", self.encoder_sizes));
        }
        if self.dropout_probs.len() != self.encoder_sizes.len() {
            return bad(format!(
                "dropout_probs has {} entries for {} encoder layers",
                self.dropout_probs.len(),
                self.encoder_sizes.len()
            ));
        }
        if let Some(p) = self.dropout_probs.iter().find(|p| !(**p >= 0.0 && **p < 1.0)) {
            return bad(format!("dropout probability {p} outside [0, 1)"));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return bad(format!("l2_lambda {} must be non-negative", self.l2_lambda));
        }
        if !(self.pretrain_noise_fraction >= 0.0 && self.pretrain_noise_fraction < 1.0) {
            return bad(format!("pretrain_noise_fraction {} outside [0, 1)", self.pretrain_noise_fraction));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !matches!(self.hidden_activation, ActivationKind::Tanh | ActivationKind::ReLU) {
            return bad(format!("hidden activation must be tanh or relu, got {:?}", self.hidden_activation));
        }
        Ok(())
    }

    pub fn bottleneck(&self) -> usize {
        *self.encoder_sizes.last().unwrap_or(&0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{block_layout, ColumnSchema};

    #[test]
    fn heads_merge_runs_but_not_softmax() {
        let schema = vec![
            ColumnSchema::continuous("a"),
            ColumnSchema::continuous("b"),
            ColumnSchema::binary("c"),
            ColumnSchema::categorical("d", &["x", "y"]),
            ColumnSchema::categorical("e", &["x", "y", "z"]),
            ColumnSchema::continuous("f"),
        ];
        let heads = heads_for_blocks(&block_layout(&schema));
        let summary: Vec<_> = heads.iter().map(|h| (h.range.clone(), h.kind)).collect();
        assert_eq!(
            summary,
            vec![
                (0..2, HeadKind::Linear),
                (2..3, HeadKind::Sigmoid),
                (3..5, HeadKind::Softmax),
                (5..8, HeadKind::Softmax),
                (8..9, HeadKind::Linear),
            ]
        );
        assert_eq!(distinct_head_kinds(&heads), 3);
        assert!(check_heads(&heads, 9).is_ok());
        assert!(check_heads(&heads, 10).is_err());
    }

    #[test]
    fn hyperparam_validation() {
        assert!(Hyperparams::default().validate().is_ok());
        let mut hp = Hyperparams::default();
        hp.dropout_probs = vec![0.1];
        assert!(hp.validate().is_err());
        let mut hp = Hyperparams::default();
        hp.hidden_activation = ActivationKind::Softmax;
        assert!(hp.validate().is_err());
        let mut hp = Hyperparams::default();
        hp.pretrain_noise_fraction = 1.0;
        assert!(hp.validate().is_err());
    }
}
