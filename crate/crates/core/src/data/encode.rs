//! One-hot encoding, standardisation, mean-fill and the inverse mapping.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{ColumnSchema, TabularDataset, VariableKind};
use crate::numerics::DenseMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    Continuous,
    Binary,
    Categorical,
}

impl From<VariableKind> for BlockKind {
    fn from(k: VariableKind) -> Self {
        match k {
            VariableKind::Continuous => BlockKind::Continuous,
            VariableKind::Binary => BlockKind::Binary,
            VariableKind::Categorical => BlockKind::Categorical,
        }
    }
}

/// Encoded columns owned by one source column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub column: usize,
    pub kind: BlockKind,
    pub range: Range<usize>,
}

pub fn block_layout(schema: &[ColumnSchema]) -> Vec<Block> {
    let mut start = 0;
    schema
        .iter()
        .enumerate()
        .map(|(column, spec)| {
            let width = spec.encoded_width();
            let block = Block {
                column,
                kind: spec.kind.into(),
                range: start..start + width,
            };
            start += width;
            block
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnStats {
    Continuous {
        mean: f64,
        std: f64,
        /// Observed values were constant; `std` was replaced by 1.
        zero_variance: bool,
    },
    Binary {
        p_one: f64,
    },
    Categorical {
        frequencies: Vec<f64>,
    },
}

/// Per-column statistics over observed cells.
pub fn compute_stats(ds: &TabularDataset) -> Result<Vec<ColumnStats>> {
    ds.schema()
        .iter()
        .enumerate()
        .map(|(c, spec)| {
            let observed = ds.observed_column(c);
            if observed.is_empty() {
                return Err(Error::EmptyColumn(spec.name.clone()));
            }
            let n = observed.len() as f64;
            Ok(match spec.kind {
                VariableKind::Continuous => {
                    let mean = observed.iter().sum::<f64>() / n;
                    let var = observed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                    let std = var.sqrt();
                    let zero_variance = !(std > 0.0);
                    ColumnStats::Continuous {
                        mean,
                        std: if zero_variance { 1.0 } else { std },
                        zero_variance,
                    }
                }
                VariableKind::Binary => ColumnStats::Binary {
                    p_one: observed.iter().sum::<f64>() / n,
                },
                VariableKind::Categorical => {
                    let mut frequencies = vec![0.0; spec.labels.len()];
                    for v in &observed {
                        frequencies[*v as usize] += 1.0;
                    }
                    frequencies.iter_mut().for_each(|f| *f /= n);
                    ColumnStats::Categorical { frequencies }
                }
            })
        })
        .collect()
}

/// Numeric design matrix derived from a [`TabularDataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    pub values: DenseMatrix,
    /// Row-major, same shape as `values`; true where the source cell is missing.
    pub mask: Vec<bool>,
    pub blocks: Vec<Block>,
    pub stats: Vec<ColumnStats>,
    pub source: TabularDataset,
}

impl EncodedMatrix {
    pub fn width(&self) -> usize {
        self.values.cols()
    }

    pub fn n_samples(&self) -> usize {
        self.values.rows()
    }

    /// Row-major, true where the encoded entry is observed.
    pub fn known_mask(&self) -> Vec<bool> {
        self.mask.iter().map(|m| !m).collect()
    }

    pub fn zero_variance_columns(&self) -> Vec<usize> {
        self.stats
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, ColumnStats::Continuous { zero_variance: true, .. }))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let w = self.width();
        let mut mask = Vec::with_capacity(indices.len() * w);
        for &r in indices {
            mask.extend_from_slice(&self.mask[r * w..(r + 1) * w]);
        }
        Self {
            values: self.values.select_rows(indices),
            mask,
            blocks: self.blocks.clone(),
            stats: self.stats.clone(),
            source: self.source.select_rows(indices),
        }
    }
}

pub fn encode(ds: &TabularDataset) -> Result<EncodedMatrix> {
    let stats = compute_stats(ds)?;
    encode_with_stats(ds, stats)
}

/// Encodes with externally supplied statistics, e.g. those of a training set.
pub fn encode_with_stats(ds: &TabularDataset, stats: Vec<ColumnStats>) -> Result<EncodedMatrix> {
    let blocks = block_layout(ds.schema());
    if stats.len() != blocks.len() {
        return Err(Error::Schema(format!(
            "{} column statistics for {} columns",
            stats.len(),
            blocks.len()
        )));
    }
    for (block, st) in blocks.iter().zip(&stats) {
        let fits = match (block.kind, st) {
            (BlockKind::Continuous, ColumnStats::Continuous { .. }) => true,
            (BlockKind::Binary, ColumnStats::Binary { .. }) => true,
            (BlockKind::Categorical, ColumnStats::Categorical { frequencies }) => {
                frequencies.len() == block.range.len()
            }
            _ => false,
        };
        if !fits {
            return Err(Error::Schema(format!(
                "statistics do not fit column '{}'",
                ds.schema()[block.column].name
            )));
        }
    }

    let width = blocks.last().map_or(0, |b| b.range.end);
    let n = ds.n_samples();
    let mut values = DenseMatrix::zeros(n, width);
    let mut mask = vec![false; n * width];
    for r in 0..n {
        let row = values.row_mut(r);
        for (block, st) in blocks.iter().zip(&stats) {
            let Some(v) = ds.get(r, block.column) else {
                mask[r * width + block.range.start..r * width + block.range.end].fill(true);
                continue;
            };
            match st {
                ColumnStats::Continuous { mean, std, .. } => row[block.range.start] = (v - mean) / std,
                ColumnStats::Binary { .. } => row[block.range.start] = v,
                ColumnStats::Categorical { .. } => row[block.range.start + v as usize] = 1.0,
            }
        }
    }
    Ok(EncodedMatrix {
        values,
        mask,
        blocks,
        stats,
        source: ds.clone(),
    })
}

/// Replaces masked entries with the observed average in encoded space.
pub fn mean_fill(em: &EncodedMatrix) -> EncodedMatrix {
    let mut out = em.clone();
    let width = em.width();
    for r in 0..em.n_samples() {
        let row = out.values.row_mut(r);
        for (block, st) in em.blocks.iter().zip(&em.stats) {
            if !em.mask[r * width + block.range.start] {
                continue;
            }
            match st {
                ColumnStats::Continuous { .. } => row[block.range.start] = 0.0,
                ColumnStats::Binary { p_one } => row[block.range.start] = *p_one,
                ColumnStats::Categorical { frequencies } => {
                    row[block.range.clone()].copy_from_slice(frequencies)
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeMode {
    /// Hard values plus the per-block probability table.
    Probabilities,
    Hard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub dataset: TabularDataset,
    /// Encoded layout; continuous entries on the original scale, binary
    /// entries are P(1), categorical blocks are class probabilities. Observed
    /// cells hold their observed (one-hot) values.
    pub probabilities: Option<DenseMatrix>,
}

fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Maps head outputs back to typed values. Observed cells of the source
/// dataset are copied unchanged; only missing cells take predictions.
pub fn decode(em: &EncodedMatrix, predictions: &DenseMatrix, mode: DecodeMode) -> Result<Decoded> {
    if !predictions.same_shape(&em.values) {
        return Err(Error::Shape(format!(
            "predictions {:?} vs encoding {:?}",
            predictions.shape(),
            em.values.shape()
        )));
    }
    let src = &em.source;
    let mut dataset = src.clone();
    let mut probs = (mode == DecodeMode::Probabilities).then(|| DenseMatrix::zeros(em.n_samples(), em.width()));
    for r in 0..em.n_samples() {
        let pred = predictions.row(r);
        for (block, st) in em.blocks.iter().zip(&em.stats) {
            let observed = src.get(r, block.column);
            let p = &pred[block.range.clone()];
            let value = match observed {
                Some(v) => v,
                None => match st {
                    ColumnStats::Continuous { mean, std, .. } => p[0] * std + mean,
                    ColumnStats::Binary { .. } => {
                        if p[0] >= 0.5 {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    ColumnStats::Categorical { .. } => argmax_lowest(p) as f64,
                },
            };
            if observed.is_none() {
                dataset.set_value(r, block.column, value)?;
            }
            if let Some(table) = probs.as_mut() {
                let out = &mut table.row_mut(r)[block.range.clone()];
                match (block.kind, observed) {
                    (BlockKind::Continuous, _) => out[0] = value,
                    (BlockKind::Binary, Some(v)) => out[0] = v,
                    (BlockKind::Binary, None) => out[0] = p[0],
                    (BlockKind::Categorical, Some(v)) => out[v as usize] = 1.0,
                    (BlockKind::Categorical, None) => out.copy_from_slice(p),
                }
            }
        }
    }
    Ok(Decoded {
        dataset,
        probabilities: probs,
    })
}

#[cfg(test)]
mod tests {
    use super::super::test_support::mixed_schema;
    use super::*;
    use proptest::prelude::*;

    fn continuous(values: &[Option<f64>]) -> TabularDataset {
        TabularDataset::new(
            vec![ColumnSchema::continuous("x")],
            values.iter().map(|v| v.unwrap_or(0.0)).collect(),
            values.iter().map(|v| v.is_none()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn layout_widths() {
        let blocks = block_layout(&mixed_schema());
        assert_eq!(blocks.last().unwrap().range.end, 5);
        assert_eq!(blocks[2].range, 2..5);
    }

    #[test]
    fn one_hot_block() {
        let schema = vec![ColumnSchema::categorical("c", &["a", "b", "c", "d"])];
        let ds = TabularDataset::fully_observed(schema, vec![2.0, 0.0]).unwrap();
        let em = encode(&ds).unwrap();
        assert_eq!(em.values.row(0), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn two_point_standardisation() {
        let em = encode(&continuous(&[Some(2.0), Some(4.0)])).unwrap();
        assert_eq!(em.values.as_slice(), &[-1.0, 1.0]);
    }

    #[test]
    fn zero_variance_is_flagged_not_rejected() {
        let em = encode(&continuous(&[Some(3.0), Some(3.0), None])).unwrap();
        assert_eq!(em.zero_variance_columns(), vec![0]);
        assert_eq!(em.values.get(0, 0), 0.0);
    }

    #[test]
    fn empty_column_rejected() {
        let err = encode(&continuous(&[None, None])).unwrap_err();
        assert!(matches!(err, Error::EmptyColumn(ref c) if c == "x"));
    }

    #[test]
    fn mean_fill_values() {
        let em = mean_fill(&encode(&continuous(&[Some(1.0), None, Some(5.0)])).unwrap());
        assert_eq!(em.values.get(1, 0), 0.0);
        assert!(em.mask[1]);

        let ds = TabularDataset::new(
            vec![ColumnSchema::binary("b")],
            vec![0.0, 1.0, 1.0, 0.0],
            vec![false, false, false, true],
        )
        .unwrap();
        let em = mean_fill(&encode(&ds).unwrap());
        assert!((em.values.get(3, 0) - 2.0 / 3.0).abs() < 1e-15);

        let ds = TabularDataset::new(
            vec![ColumnSchema::categorical("c", &["x", "y", "z"])],
            vec![0.0, 0.0, 1.0, 2.0, 0.0],
            vec![false, false, false, false, true],
        )
        .unwrap();
        let em = mean_fill(&encode(&ds).unwrap());
        assert_eq!(em.values.row(4), &[0.5, 0.25, 0.25]);
    }

    #[test]
    fn decode_rules() {
        let ds = TabularDataset::new(mixed_schema(), vec![0.0, 0.0, 0.0, 10.0, 1.0, 1.0], vec![true, true, true, false, false, false]).unwrap();
        let mut em = encode(&ds).unwrap();
        em.stats[0] = ColumnStats::Continuous { mean: 10.0, std: 2.0, zero_variance: false };
        let pred = DenseMatrix::new(2, 5, vec![1.0, 0.7, 0.1, 0.7, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let out = decode(&em, &pred, DecodeMode::Probabilities).unwrap();
        assert_eq!(out.dataset.get(0, 0), Some(12.0));
        assert_eq!(out.dataset.get(0, 1), Some(1.0));
        assert_eq!(out.dataset.get(0, 2), Some(1.0));
        // observed row copied unchanged
        assert_eq!(out.dataset.row(1), ds.row(1));
        let probs = out.probabilities.unwrap();
        assert_eq!(probs.row(0), &[12.0, 0.7, 0.1, 0.7, 0.2]);
        assert_eq!(probs.row(1), &[10.0, 1.0, 0.0, 1.0, 0.0]);

        let tie = DenseMatrix::new(2, 5, vec![0.0, 0.2, 0.4, 0.4, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let out = decode(&em, &tie, DecodeMode::Hard).unwrap();
        assert_eq!(out.dataset.get(0, 2), Some(0.0));
        assert_eq!(out.dataset.get(0, 1), Some(0.0));
        assert!(out.probabilities.is_none());

        assert!(decode(&em, &DenseMatrix::zeros(2, 4), DecodeMode::Hard).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode_identity_and_fill_invariants(
            rows in prop::collection::vec((-50.0f64..50.0, 0u8..2, 0usize..3, any::<[bool; 3]>()), 3..25)
        ) {
            let mut values = Vec::new();
            let mut missing = Vec::new();
            for (i, (x, b, c, m)) in rows.iter().enumerate() {
                values.extend([*x, f64::from(*b), *c as f64]);
                // first row fully observed so no column is empty
                missing.extend(m.iter().map(|&v| v && i > 0));
            }
            let ds = TabularDataset::new(mixed_schema(), values.clone(), vec![false; values.len()]).unwrap();
            let em = encode(&ds).unwrap();
            let back = decode(&em, &em.values, DecodeMode::Hard).unwrap();
            prop_assert_eq!(&back.dataset, &ds);

            let partial = TabularDataset::new(mixed_schema(), values, missing).unwrap();
            let filled = mean_fill(&encode(&partial).unwrap());
            let w = filled.width();
            for block in &filled.blocks {
                let mut shared: Option<Vec<f64>> = None;
                for r in 0..filled.n_samples() {
                    if !filled.mask[r * w + block.range.start] { continue; }
                    let v = filled.values.row(r)[block.range.clone()].to_vec();
                    if block.kind == BlockKind::Categorical {
                        prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    }
                    if let Some(s) = &shared { prop_assert_eq!(s, &v); } else { shared = Some(v); }
                }
            }
        }
    }
}
