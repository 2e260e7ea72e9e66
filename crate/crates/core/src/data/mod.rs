//! Schema-aware mixed-type tables.
//!
//! A [`TabularDataset`] stores every cell as `f64` in row-major order:
//! continuous values as-is, binary cells as `0.0`/`1.0`, categorical cells
//! as the index of their label. Missing cells carry a canonical `0.0` and are
//! flagged in a parallel boolean mask.

mod encode;
mod images;
mod io;
mod schema;
mod synthetic;

pub use encode::{
    block_layout, compute_stats, decode, encode, encode_with_stats, mean_fill, Block, BlockKind,
    ColumnStats, DecodeMode, Decoded, EncodedMatrix,
};
pub use images::{generate_blobs, image_schema, BlobSpec};
pub use io::{format_float, load_csv, load_schema, read_csv, save_schema, write_csv, write_csv_to};
pub use schema::{validate_schema, ColumnSchema, VariableKind};
pub use synthetic::{generate_synthetic, shifted_sine_sample, SyntheticSpec};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    schema: Vec<ColumnSchema>,
    n_samples: usize,
    values: Vec<f64>,
    missing: Vec<bool>,
}

impl TabularDataset {
    /// Builds a dataset from row-major cells and a row-major missing mask.
    ///
    /// Values under the mask are replaced by `0.0`.
    pub fn new(schema: Vec<ColumnSchema>, mut values: Vec<f64>, missing: Vec<bool>) -> Result<Self> {
        validate_schema(&schema)?;
        let n_cols = schema.len();
        if n_cols == 0 {
            return Err(Error::Schema("dataset needs at least one column".into()));
        }
        if values.len() % n_cols != 0 || missing.len() != values.len() {
            return Err(Error::Shape(format!(
                "{} values and {} mask entries for {n_cols} columns",
                values.len(),
                missing.len()
            )));
        }
        let n_samples = values.len() / n_cols;
        for (i, (v, &m)) in values.iter_mut().zip(&missing).enumerate() {
            if m {
                *v = 0.0;
                continue;
            }
            let (row, col) = (i / n_cols, i % n_cols);
            schema[col].check_value(*v).map_err(|msg| {
                Error::InvalidArgument(format!("row {row}, column '{}': {msg}", schema[col].name))
            })?;
        }
        Ok(Self {
            schema,
            n_samples,
            values,
            missing,
        })
    }

    pub fn fully_observed(schema: Vec<ColumnSchema>, values: Vec<f64>) -> Result<Self> {
        let missing = vec![false; values.len()];
        Self::new(schema, values, missing)
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_columns(&self) -> usize {
        self.schema.len()
    }

    pub fn n_cells(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.schema.len() + col
    }

    /// Cell value, `None` when missing.
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let i = self.index(row, col);
        (!self.missing[i]).then(|| self.values[i])
    }

    /// Cell value regardless of missingness (`0.0` when missing).
    pub fn raw(&self, row: usize, col: usize) -> f64 {
        self.values[self.index(row, col)]
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.missing[self.index(row, col)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn missing_mask(&self) -> &[bool] {
        &self.missing
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let n = self.schema.len();
        &self.values[row * n..(row + 1) * n]
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    pub fn observed_count(&self) -> usize {
        self.n_cells() - self.missing_count()
    }

    pub fn set_missing(&mut self, row: usize, col: usize) {
        let i = self.index(row, col);
        self.missing[i] = true;
        self.values[i] = 0.0;
    }

    /// Sets a cell to an observed value.
    pub fn set_value(&mut self, row: usize, col: usize, value: f64) -> Result<()> {
        self.schema[col]
            .check_value(value)
            .map_err(|msg| Error::InvalidArgument(format!("row {row}, column '{}': {msg}", self.schema[col].name)))?;
        let i = self.index(row, col);
        self.values[i] = value;
        self.missing[i] = false;
        Ok(())
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let n = self.schema.len();
        let mut values = Vec::with_capacity(indices.len() * n);
        let mut missing = Vec::with_capacity(indices.len() * n);
        for &r in indices {
            values.extend_from_slice(&self.values[r * n..(r + 1) * n]);
            missing.extend_from_slice(&self.missing[r * n..(r + 1) * n]);
        }
        Self {
            schema: self.schema.clone(),
            n_samples: indices.len(),
            values,
            missing,
        }
    }

    /// Column values of observed cells.
    pub fn observed_column(&self, col: usize) -> Vec<f64> {
        (0..self.n_samples).filter_map(|r| self.get(r, col)).collect()
    }
}


#[cfg(test)]
mod tests {
    use super::test_support::mixed_schema;
    use super::*;

    #[test]
    fn construction_validates_domains() {
        let ok = TabularDataset::fully_observed(mixed_schema(), vec![1.5, 1.0, 2.0]);
        assert!(ok.is_ok());
        assert!(TabularDataset::fully_observed(mixed_schema(), vec![1.5, 2.0, 2.0]).is_err());
        assert!(TabularDataset::fully_observed(mixed_schema(), vec![1.5, 1.0, 3.0]).is_err());
        assert!(TabularDataset::fully_observed(mixed_schema(), vec![1.5, 1.0]).is_err());
        // masked cells are not validated and are canonicalised
        let ds = TabularDataset::new(mixed_schema(), vec![1.5, 7.0, 2.0], vec![false, true, false]).unwrap();
        assert_eq!(ds.raw(0, 1), 0.0);
        assert_eq!(ds.get(0, 1), None);
        assert_eq!(ds.missing_count(), 1);
    }

    #[test]
    fn row_selection_keeps_mask() {
        let ds = TabularDataset::new(
            mixed_schema(),
            vec![1.0, 0.0, 0.0, 2.0, 1.0, 1.0],
            vec![false, false, false, true, false, false],
        )
        .unwrap();
        let sub = ds.select_rows(&[1]);
        assert_eq!(sub.n_samples(), 1);
        assert!(sub.is_missing(0, 0));
        assert_eq!(sub.get(0, 2), Some(1.0));
    }
}
