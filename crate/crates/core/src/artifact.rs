//! Versioned model files.
//!
//! A model is stored as one JSON document. Matrices and vectors are base64
//! strings of little-endian `f64` bytes with an explicit shape, so loading
//! reproduces every parameter bit for bit. A SHA-256 checksum over the rest
//! of the document catches truncation and tampering.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::data::{ColumnSchema, ColumnStats};
use crate::numerics::{ActivationKind, DenseMatrix};
use crate::sdai::{AutoencoderModel, Hyperparams, LayerParams, OutputHead, SdaiModel};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct EncodedArray {
    rows: usize,
    cols: usize,
    data: String,
}

impl EncodedArray {
    fn from_values(rows: usize, cols: usize, values: &[f64]) -> Self {
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        Self {
            rows,
            cols,
            data: STANDARD.encode(bytes),
        }
    }

    fn matrix(m: &DenseMatrix) -> Self {
        Self::from_values(m.rows(), m.cols(), m.as_slice())
    }

    fn vector(v: &[f64]) -> Self {
        Self::from_values(1, v.len(), v)
    }

    fn values(&self, what: &str) -> Result<Vec<f64>> {
        let bytes = STANDARD
            .decode(&self.data)
            .map_err(|e| Error::Artifact(format!("{what}: invalid base64: {e}")))?;
        if bytes.len() != self.rows * self.cols * 8 {
            return Err(Error::Artifact(format!(
                "{what}: {} bytes for a {}x{} array",
                bytes.len(),
                self.rows,
                self.cols
            )));
        }
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    }

    fn to_matrix(&self, what: &str) -> Result<DenseMatrix> {
        DenseMatrix::new(self.rows, self.cols, self.values(what)?)
    }

    fn to_vector(&self, what: &str) -> Result<Vec<f64>> {
        if self.rows != 1 {
            return Err(Error::Artifact(format!("{what}: expected a row vector")));
        }
        self.values(what)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct EncodedLayer {
    weights: EncodedArray,
    bias: EncodedArray,
    activation: ActivationKind,
}

#[derive(Debug, Serialize, Deserialize)]
struct ArtifactBody {
    format_version: u32,
    schema: Vec<ColumnSchema>,
    column_stats: Vec<ColumnStats>,
    hyperparams: Hyperparams,
    head_spec: Vec<OutputHead>,
    hidden_activation: ActivationKind,
    encoder: Vec<EncodedLayer>,
    decoder_biases: Vec<EncodedArray>,
    untied_final: Option<EncodedArray>,
    loss_history: EncodedArray,
}

fn checksum(body: &Value) -> Result<String> {
    let bytes = serde_json::to_vec(body)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Serialises a trained model to a JSON string.
pub fn to_json(model: &SdaiModel) -> Result<String> {
    let m = &model.model;
    let body = ArtifactBody {
        format_version: FORMAT_VERSION,
        schema: model.schema.clone(),
        column_stats: model.stats.clone(),
        hyperparams: model.hyperparams.clone(),
        head_spec: m.heads.clone(),
        hidden_activation: m.hidden_activation,
        encoder: m
            .encoder
            .iter()
            .map(|l| EncodedLayer {
                weights: EncodedArray::matrix(&l.weights),
                bias: EncodedArray::vector(&l.bias),
                activation: l.activation,
            })
            .collect(),
        decoder_biases: m.decoder_biases.iter().map(|b| EncodedArray::vector(b)).collect(),
        untied_final: m.untied_final.as_ref().map(EncodedArray::matrix),
        loss_history: EncodedArray::vector(&model.loss_history),
    };
    let mut value = serde_json::to_value(&body)?;
    let sum = checksum(&value)?;
    value
        .as_object_mut()
        .expect("artifact body is an object")
        .insert("checksum".into(), Value::String(sum));
    Ok(serde_json::to_string_pretty(&value)?)
}

/// Parses and verifies an artifact produced by [`to_json`].
pub fn from_json(text: &str) -> Result<SdaiModel> {
    let mut value: Value = serde_json::from_str(text)
        .map_err(|e| Error::Artifact(format!("truncated or malformed model file: {e}")))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::Artifact("model file is not a JSON object".into()))?;
    let found = obj
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Artifact("missing format_version".into()))?;
    if found != u64::from(FORMAT_VERSION) {
        return Err(Error::Version {
            found: u32::try_from(found).unwrap_or(u32::MAX),
            expected: FORMAT_VERSION,
        });
    }
    let stored = match obj.remove("checksum") {
        Some(Value::String(s)) => s,
        _ => return Err(Error::Artifact("missing checksum".into())),
    };
    let actual = checksum(&value)?;
    if stored != actual {
        return Err(Error::Artifact(format!("checksum mismatch: stored {stored}, computed {actual}")));
    }
    let body: ArtifactBody =
        serde_json::from_value(value).map_err(|e| Error::Artifact(format!("invalid model file: {e}")))?;

    let encoder = body
        .encoder
        .iter()
        .enumerate()
        .map(|(i, l)| {
            Ok(LayerParams {
                weights: l.weights.to_matrix(&format!("encoder layer {i} weights"))?,
                bias: l.bias.to_vector(&format!("encoder layer {i} bias"))?,
                activation: l.activation,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let decoder_biases = body
        .decoder_biases
        .iter()
        .enumerate()
        .map(|(i, b)| b.to_vector(&format!("decoder layer {i} bias")))
        .collect::<Result<Vec<_>>>()?;
    let untied_final = body
        .untied_final
        .as_ref()
        .map(|u| u.to_matrix("untied final layer"))
        .transpose()?;
    let model = AutoencoderModel {
        encoder,
        decoder_biases,
        heads: body.head_spec,
        untied_final,
        hidden_activation: body.hidden_activation,
    };
    model
        .validate()
        .map_err(|e| Error::Artifact(format!("inconsistent model: {e}")))?;
    Ok(SdaiModel {
        model,
        schema: body.schema,
        stats: body.column_stats,
        hyperparams: body.hyperparams,
        loss_history: body.loss_history.to_vector("loss history")?,
    })
}

pub fn save_model(model: &SdaiModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_json(model)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SdaiModel> {
    from_json(&fs::read_to_string(path)?)
}
