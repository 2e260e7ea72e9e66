//! Reference imputers: column mean / mode and distance-weighted K-nearest
//! neighbours.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{block_layout, compute_stats, encode, BlockKind, ColumnStats, TabularDataset};
use crate::numerics::DenseMatrix;
use crate::{Error, Result};

/// Output of a baseline imputer.
#[derive(Debug, Clone, PartialEq)]
pub struct Imputation {
    pub dataset: TabularDataset,
    /// Encoded layout: continuous entries on the original scale, binary
    /// entries P(1), categorical blocks class probabilities. Observed cells
    /// carry their observed (one-hot) values.
    pub probabilities: DenseMatrix,
    /// Cells `(row, column)` where no eligible neighbour existed and the
    /// column mean or mode was used instead.
    pub fallbacks: Vec<(usize, usize)>,
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

/// Fill value and probability vector of a column's mean/mode imputation.
fn mean_prediction(st: &ColumnStats) -> (f64, Vec<f64>) {
    match st {
        ColumnStats::Continuous { mean, .. } => (*mean, vec![*mean]),
        ColumnStats::Binary { p_one } => (if *p_one > 0.5 { 1.0 } else { 0.0 }, vec![*p_one]),
        ColumnStats::Categorical { frequencies } => (argmax_lowest(frequencies) as f64, frequencies.clone()),
    }
}

pub(crate) fn observed_probabilities(ds: &TabularDataset) -> DenseMatrix {
    let blocks = block_layout(ds.schema());
    let width = blocks.last().map_or(0, |b| b.range.end);
    let mut table = DenseMatrix::zeros(ds.n_samples(), width);
    for r in 0..ds.n_samples() {
        let row = table.row_mut(r);
        for b in &blocks {
            if let Some(v) = ds.get(r, b.column) {
                match b.kind {
                    BlockKind::Categorical => row[b.range.start + v as usize] = 1.0,
                    _ => row[b.range.start] = v,
                }
            }
        }
    }
    table
}

/// Continuous cells take the observed column mean; binary and categorical
/// cells the most frequent observed value (ties toward the lowest index).
pub fn impute_mean(ds: &TabularDataset) -> Result<Imputation> {
    let stats = compute_stats(ds)?;
    let blocks = block_layout(ds.schema());
    let fills: Vec<(f64, Vec<f64>)> = stats.iter().map(mean_prediction).collect();
    let mut dataset = ds.clone();
    let mut probabilities = observed_probabilities(ds);
    for r in 0..ds.n_samples() {
        for (b, (value, probs)) in blocks.iter().zip(&fills) {
            if ds.is_missing(r, b.column) {
                dataset.set_value(r, b.column, *value)?;
                probabilities.row_mut(r)[b.range.clone()].copy_from_slice(probs);
            }
        }
    }
    Ok(Imputation {
        dataset,
        probabilities,
        fallbacks: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
    /// Kernel bandwidth: neighbour `j` gets weight `exp(-d_j² / lambda)`.
    pub lambda: f64,
}

impl KnnParams {
    pub fn validate(&self, n_samples: usize) -> Result<()> {
        if self.k == 0 || self.k + 1 > n_samples {
            return Err(Error::InvalidArgument(format!(
                "k = {} must lie in [1, {}]",
                self.k,
                n_samples.saturating_sub(1)
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("knn lambda {} must be positive", self.lambda)));
        }
        Ok(())
    }
}

/// Distance over commonly observed encoded entries: the square root of the
/// mean squared coordinate difference. `None` when nothing is shared.
fn masked_distance(a: &[f64], ka: &[f64], b: &[f64], kb: &[f64]) -> Option<f64> {
    let mut sum = 0.0;
    let mut common = 0.0;
    for i in 0..a.len() {
        let both = ka[i] * kb[i];
        let diff = a[i] - b[i];
        sum += both * diff * diff;
        common += both;
    }
    (common > 0.0).then(|| (sum / common).sqrt())
}

struct CellPrediction {
    column: usize,
    value: f64,
    probs: Vec<f64>,
    fallback: bool,
}

/// Weighted K-NN imputation.
pub fn impute_knn(ds: &TabularDataset, params: KnnParams) -> Result<Imputation> {
    Ok(impute_knn_multi(ds, &[params])?.pop().expect("one result"))
}

/// Runs several parameter settings while computing each row's neighbour
/// ordering only once.
pub fn impute_knn_multi(ds: &TabularDataset, params: &[KnnParams]) -> Result<Vec<Imputation>> {
    for p in params {
        p.validate(ds.n_samples())?;
    }
    let em = encode(ds)?;
    let n = ds.n_samples();
    let width = em.width();
    let known: Vec<f64> = em.mask.iter().map(|&m| if m { 0.0 } else { 1.0 }).collect();
    let fills: Vec<(f64, Vec<f64>)> = em.stats.iter().map(mean_prediction).collect();

    let per_row: Vec<Vec<Vec<CellPrediction>>> = (0..n)
        .into_par_iter()
        .map(|r| {
            let missing_cols: Vec<usize> = (0..ds.n_columns()).filter(|&c| ds.is_missing(r, c)).collect();
            if missing_cols.is_empty() {
                return params.iter().map(|_| Vec::new()).collect();
            }
            let row = em.values.row(r);
            let kr = &known[r * width..(r + 1) * width];
            let mut order: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != r)
                .filter_map(|j| {
                    masked_distance(row, kr, em.values.row(j), &known[j * width..(j + 1) * width]).map(|d| (d, j))
                })
                .collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

            params
                .iter()
                .map(|p| {
                    missing_cols
                        .iter()
                        .map(|&c| {
                            let neighbours: Vec<(f64, usize)> = order
                                .iter()
                                .filter(|(_, j)| !ds.is_missing(*j, c))
                                .take(p.k)
                                .copied()
                                .collect();
                            predict_cell(ds, c, &neighbours, p.lambda, &fills[c], em.blocks[c].kind)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let base = observed_probabilities(ds);
    let blocks = &em.blocks;
    let mut out = Vec::with_capacity(params.len());
    for pi in 0..params.len() {
        let mut dataset = ds.clone();
        let mut probabilities = base.clone();
        let mut fallbacks = Vec::new();
        for (r, cells) in per_row.iter().enumerate() {
            for cell in &cells[pi] {
                dataset.set_value(r, cell.column, cell.value)?;
                probabilities.row_mut(r)[blocks[cell.column].range.clone()].copy_from_slice(&cell.probs);
                if cell.fallback {
                    fallbacks.push((r, cell.column));
                }
            }
        }
        out.push(Imputation {
            dataset,
            probabilities,
            fallbacks,
        });
    }
    Ok(out)
}

fn predict_cell(
    ds: &TabularDataset,
    column: usize,
    neighbours: &[(f64, usize)],
    lambda: f64,
    fill: &(f64, Vec<f64>),
    kind: BlockKind,
) -> CellPrediction {
    if neighbours.is_empty() {
        return CellPrediction {
            column,
            value: fill.0,
            probs: fill.1.clone(),
            fallback: true,
        };
    }
    // Shifting every exponent by the nearest distance leaves the normalised
    // weights unchanged and keeps them from underflowing.
    let d0 = neighbours[0].0 * neighbours[0].0;
    let weights: Vec<f64> = neighbours.iter().map(|(d, _)| (-(d * d - d0) / lambda).exp()).collect();
    let total: f64 = weights.iter().sum();
    let values = neighbours.iter().map(|&(_, j)| ds.raw(j, column));
    let (value, probs) = match kind {
        BlockKind::Continuous => {
            let mean = values.zip(&weights).map(|(v, w)| v * w).sum::<f64>() / total;
            (mean, vec![mean])
        }
        BlockKind::Binary | BlockKind::Categorical => {
            let classes = if kind == BlockKind::Binary { 2 } else { ds.schema()[column].labels.len() };
            let mut votes = vec![0.0; classes];
            for (v, w) in values.zip(&weights) {
                votes[v as usize] += w;
            }
            let value = argmax_lowest(&votes) as f64;
            votes.iter_mut().for_each(|v| *v /= total);
            let probs = if kind == BlockKind::Binary { vec![votes[1]] } else { votes };
            (value, probs)
        }
    };
    CellPrediction {
        column,
        value,
        probs,
        fallback: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ColumnSchema;

    fn ds(schema: Vec<ColumnSchema>, rows: &[&[Option<f64>]]) -> TabularDataset {
        let values = rows.iter().flat_map(|r| r.iter().map(|v| v.unwrap_or(0.0))).collect();
        let missing = rows.iter().flat_map(|r| r.iter().map(|v| v.is_none())).collect();
        TabularDataset::new(schema, values, missing).unwrap()
    }

    #[test]
    fn mean_and_mode() {
        let d = ds(
            vec![ColumnSchema::continuous("x"), ColumnSchema::binary("b")],
            &[&[Some(1.0), Some(0.0)], &[None, Some(1.0)], &[Some(3.0), Some(1.0)], &[Some(2.0), None]],
        );
        let out = impute_mean(&d).unwrap();
        assert_eq!(out.dataset.get(1, 0), Some(2.0));
        assert_eq!(out.dataset.get(3, 1), Some(1.0));
        assert!((out.probabilities.get(3, 1) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(out.probabilities.get(0, 0), 1.0);

        let tie = ds(vec![ColumnSchema::categorical("c", &["a", "b"])], &[&[Some(1.0)], &[Some(0.0)], &[None]]);
        assert_eq!(impute_mean(&tie).unwrap().dataset.get(2, 0), Some(0.0));

        let empty = ds(vec![ColumnSchema::continuous("x"), ColumnSchema::continuous("gone")], &[&[Some(1.0), None]]);
        let err = impute_mean(&empty).unwrap_err().to_string();
        assert!(err.contains("gone"));
    }

    #[test]
    fn duplicate_row_is_copied_with_k1() {
        let d = ds(
            vec![ColumnSchema::continuous("x"), ColumnSchema::continuous("y"), ColumnSchema::continuous("z")],
            &[
                &[Some(1.0), Some(2.0), None],
                &[Some(5.0), Some(-1.0), Some(9.0)],
                &[Some(1.0), Some(2.0), Some(7.5)],
                &[Some(0.0), Some(4.0), Some(1.0)],
            ],
        );
        let out = impute_knn(&d, KnnParams { k: 1, lambda: 1.0 }).unwrap();
        assert_eq!(out.dataset.get(0, 2), Some(7.5));
        assert!(out.fallbacks.is_empty());
    }

    #[test]
    fn equidistant_neighbours_average() {
        let d = ds(
            vec![ColumnSchema::continuous("x"), ColumnSchema::continuous("y")],
            &[&[Some(0.0), None], &[Some(1.0), Some(0.0)], &[Some(-1.0), Some(2.0)], &[Some(10.0), Some(50.0)]],
        );
        let out = impute_knn(&d, KnnParams { k: 2, lambda: 0.5 }).unwrap();
        assert!((out.dataset.get(0, 1).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_vote_and_fallback() {
        let d = ds(
            vec![ColumnSchema::continuous("x"), ColumnSchema::categorical("c", &["a", "b", "c"])],
            &[
                &[Some(0.0), None],
                &[Some(0.1), Some(2.0)],
                &[Some(0.5), Some(1.0)],
                &[Some(0.6), Some(1.0)],
                &[None, None],
            ],
        );
        let out = impute_knn(&d, KnnParams { k: 3, lambda: 0.01 }).unwrap();
        assert_eq!(out.dataset.get(0, 1), Some(2.0));
        let p = out.probabilities.row(0)[1..4].to_vec();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p[2] > 0.9);
        // The last row shares no observed feature with anyone.
        assert_eq!(out.fallbacks, vec![(4, 0), (4, 1)]);
        assert_eq!(out.dataset.get(4, 1), Some(1.0));
        assert!(impute_knn(&d, KnnParams { k: 5, lambda: 1.0 }).is_err());
        assert!(impute_knn(&d, KnnParams { k: 1, lambda: 0.0 }).is_err());
    }
}
