//! Training and imputation on typed datasets.

use crate::data::{
    decode, encode, encode_with_stats, mean_fill, ColumnSchema, ColumnStats, DecodeMode, Decoded,
    EncodedMatrix, TabularDataset,
};
use crate::seed::derive_rng;
use crate::{Error, Result};

use super::model::{heads_for_blocks, AutoencoderModel, Hyperparams};
use super::network::forward;
use super::train::{finetune, pretrain_encoder, random_encoder, stack_and_mirror};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitOptions {
    /// Layer-wise pre-training; when off the encoder starts from random weights.
    pub pretrain: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { pretrain: true }
    }
}

/// A trained autoencoder together with everything needed to re-encode new
/// data the same way.
#[derive(Debug, Clone, PartialEq)]
pub struct SdaiModel {
    pub model: AutoencoderModel,
    pub schema: Vec<ColumnSchema>,
    pub stats: Vec<ColumnStats>,
    pub hyperparams: Hyperparams,
    pub loss_history: Vec<f64>,
}

pub fn fit(ds: &TabularDataset, hp: &Hyperparams) -> Result<SdaiModel> {
    fit_with(ds, hp, FitOptions::default())
}

pub fn fit_with(ds: &TabularDataset, hp: &Hyperparams, options: FitOptions) -> Result<SdaiModel> {
    hp.validate()?;
    let em = encode(ds)?;
    let model = build_model(&em, hp, options)?;
    let (model, loss_history) = finetune_encoded(model, &em, hp)?;
    Ok(SdaiModel {
        model,
        schema: ds.schema().to_vec(),
        stats: em.stats,
        hyperparams: hp.clone(),
        loss_history,
    })
}

/// Pre-trains (or randomly initialises) and mirrors, without fine-tuning.
pub fn build_model(em: &EncodedMatrix, hp: &Hyperparams, options: FitOptions) -> Result<AutoencoderModel> {
    hp.validate()?;
    if hp.bottleneck() >= em.width() {
        return Err(Error::InvalidArgument(format!(
            "bottleneck width {} must be below encoded width {}",
            hp.bottleneck(),
            em.width()
        )));
    }
    let filled = mean_fill(em);
    let known = em.known_mask();
    let heads = heads_for_blocks(&em.blocks);
    let encoder = if options.pretrain {
        pretrain_encoder(&filled.values, &known, &heads, hp)?
    } else {
        random_encoder(em.width(), hp)?
    };
    stack_and_mirror(encoder, heads, &mut derive_rng(hp.seed, "mirror", 0))
}

fn finetune_encoded(mut model: AutoencoderModel, em: &EncodedMatrix, hp: &Hyperparams) -> Result<(AutoencoderModel, Vec<f64>)> {
    let filled = mean_fill(em);
    let history = finetune(&mut model, &filled.values, &em.known_mask(), hp)?;
    Ok((model, history))
}

/// Mean-fills missing entries, runs the network without dropout and decodes
/// the reconstruction. Observed cells are returned unchanged.
pub fn impute(model: &AutoencoderModel, em: &EncodedMatrix, mode: DecodeMode) -> Result<Decoded> {
    let filled = mean_fill(em);
    let pass = forward(model, &filled.values, None)?;
    decode(em, pass.output(), mode)
}

pub(crate) fn schema_diff(expected: &[ColumnSchema], found: &[ColumnSchema]) -> Option<String> {
    let mut diffs = Vec::new();
    for i in 0..expected.len().max(found.len()) {
        match (expected.get(i), found.get(i)) {
            (Some(a), Some(b)) if a == b => {}
            (Some(a), Some(b)) => diffs.push(format!(
                "column {i}: expected {} ({:?}{}), found {} ({:?}{})",
                a.name,
                a.kind,
                if a.labels.is_empty() { String::new() } else { format!(" {:?}", a.labels) },
                b.name,
                b.kind,
                if b.labels.is_empty() { String::new() } else { format!(" {:?}", b.labels) },
            )),
            (Some(a), None) => diffs.push(format!("column {i}: expected {}, missing", a.name)),
            (None, Some(b)) => diffs.push(format!("column {i}: unexpected {}", b.name)),
            (None, None) => {}
        }
    }
    (!diffs.is_empty()).then(|| diffs.join("; "))
}

impl SdaiModel {
    pub fn check_schema(&self, schema: &[ColumnSchema]) -> Result<()> {
        match schema_diff(&self.schema, schema) {
            None => Ok(()),
            Some(diff) => Err(Error::Schema(format!("model was trained on a different schema: {diff}"))),
        }
    }

    /// Imputes `ds` using the statistics recorded at training time.
    pub fn impute(&self, ds: &TabularDataset, mode: DecodeMode) -> Result<Decoded> {
        self.check_schema(ds.schema())?;
        let em = encode_with_stats(ds, self.stats.clone())?;
        impute(&self.model, &em, mode)
    }
}
