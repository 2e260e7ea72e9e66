//! Gold-standard missingness generators.
//!
//! Each generator removes observed cells from a dataset and records which
//! cells it removed, so imputations can be scored against the true values.

mod export;
mod ising;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use export::{write_mask_csv, write_pgm};
pub use ising::{ising_mask, ising_sample, neighbour_agreement, IsingMask};

use crate::data::{TabularDataset, VariableKind};
use crate::seed::{derive_seed, rng_from_seed};
use crate::{Error, Result};

pub const DEFAULT_COUPLING: f64 = 0.4;
pub const DEFAULT_SWEEPS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum CorruptionKind {
    Cells {
        fraction: f64,
    },
    Lines {
        fraction: f64,
        height: usize,
        width: usize,
    },
    IsingMask {
        target_fraction: f64,
        coupling: f64,
        sweeps: usize,
        height: usize,
        width: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn cells(fraction: f64, seed: u64) -> Self {
        Self {
            kind: CorruptionKind::Cells { fraction },
            seed,
        }
    }

    pub fn nominal_fraction(&self) -> f64 {
        match self.kind {
            CorruptionKind::Cells { fraction } | CorruptionKind::Lines { fraction, .. } => fraction,
            CorruptionKind::IsingMask { target_fraction, .. } => target_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldStandard {
    pub original: TabularDataset,
    pub corrupted: TabularDataset,
    /// Row-major over cells; true where corruption removed an observed cell.
    pub eval_mask: Vec<bool>,
}

impl GoldStandard {
    /// Applies `eval_mask`, ignoring cells already missing in `original`.
    pub fn from_mask(original: TabularDataset, mut eval_mask: Vec<bool>) -> Result<Self> {
        if eval_mask.len() != original.n_cells() {
            return Err(Error::Shape(format!(
                "mask of {} cells for a {}-cell dataset",
                eval_mask.len(),
                original.n_cells()
            )));
        }
        let mut corrupted = original.clone();
        let n_cols = original.n_columns();
        for (i, m) in eval_mask.iter_mut().enumerate() {
            if original.missing_mask()[i] {
                *m = false;
            } else if *m {
                corrupted.set_missing(i / n_cols, i % n_cols);
            }
        }
        Ok(Self {
            original,
            corrupted,
            eval_mask,
        })
    }

    /// No cells removed.
    pub fn identity(original: TabularDataset) -> Self {
        let eval_mask = vec![false; original.n_cells()];
        Self {
            corrupted: original.clone(),
            original,
            eval_mask,
        }
    }

    pub fn eval_count(&self) -> usize {
        self.eval_mask.iter().filter(|&&m| m).count()
    }

    /// Removed cells as a fraction of all cells.
    pub fn achieved_fraction(&self) -> f64 {
        self.eval_count() as f64 / self.eval_mask.len().max(1) as f64
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let n = self.original.n_columns();
        let eval_mask = rows
            .iter()
            .flat_map(|&r| self.eval_mask[r * n..(r + 1) * n].iter().copied())
            .collect();
        Self {
            original: self.original.select_rows(rows),
            corrupted: self.corrupted.select_rows(rows),
            eval_mask,
        }
    }
}

fn check_fraction(name: &str, f: f64) -> Result<()> {
    if f > 0.0 && f < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must lie in (0, 1), got {f}")))
    }
}

pub fn corrupt(ds: &TabularDataset, spec: &CorruptionSpec) -> Result<GoldStandard> {
    match spec.kind {
        CorruptionKind::Cells { fraction } => corrupt_cells(ds, fraction, spec.seed),
        CorruptionKind::Lines {
            fraction,
            height,
            width,
        } => corrupt_lines(ds, fraction, height, width, spec.seed),
        CorruptionKind::IsingMask {
            target_fraction,
            coupling,
            sweeps,
            height,
            width,
        } => corrupt_ising(ds, target_fraction, coupling, sweeps, height, width, spec.seed),
    }
}

/// Removes exactly `⌊fraction · #observed⌋` observed cells, sampled
/// uniformly without replacement.
pub fn corrupt_cells(ds: &TabularDataset, fraction: f64, seed: u64) -> Result<GoldStandard> {
    check_fraction("fraction", fraction)?;
    let observed: Vec<usize> = ds
        .missing_mask()
        .iter()
        .enumerate()
        .filter(|(_, &m)| !m)
        .map(|(i, _)| i)
        .collect();
    let count = (fraction * observed.len() as f64).floor() as usize;
    let mut rng = rng_from_seed(seed);
    let mut eval_mask = vec![false; ds.n_cells()];
    for i in sample(&mut rng, observed.len(), count) {
        eval_mask[observed[i]] = true;
    }
    GoldStandard::from_mask(ds.clone(), eval_mask)
}

fn check_image_shape(ds: &TabularDataset, height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 || ds.n_columns() != height * width {
        return Err(Error::Shape(format!(
            "rows of width {} cannot be reshaped to {height}x{width}",
            ds.n_columns()
        )));
    }
    if let Some(c) = ds.schema().iter().find(|c| c.kind != VariableKind::Continuous) {
        return Err(Error::InvalidArgument(format!(
            "image corruption needs continuous columns, '{}' is not",
            c.name
        )));
    }
    Ok(())
}

/// Number of lines removed along an axis of length `len`; the nominal
/// fraction is split evenly between horizontal and vertical lines.
pub fn lines_per_axis(fraction: f64, len: usize) -> usize {
    // tolerance keeps e.g. (2/28)/2·28 from flooring to 0
    (fraction / 2.0 * len as f64 + 1e-9).floor() as usize
}

pub fn corrupt_lines(
    ds: &TabularDataset,
    fraction: f64,
    height: usize,
    width: usize,
    seed: u64,
) -> Result<GoldStandard> {
    check_fraction("fraction", fraction)?;
    check_image_shape(ds, height, width)?;
    let n_rows = lines_per_axis(fraction, height);
    let n_cols = lines_per_axis(fraction, width);
    let mut rng = rng_from_seed(seed);
    let mut eval_mask = vec![false; ds.n_cells()];
    let mut all_rows: Vec<usize> = (0..height).collect();
    let mut all_cols: Vec<usize> = (0..width).collect();
    for mask in eval_mask.chunks_exact_mut(height * width) {
        all_rows.shuffle(&mut rng);
        all_cols.shuffle(&mut rng);
        for &r in &all_rows[..n_rows] {
            mask[r * width..(r + 1) * width].fill(true);
        }
        for &c in &all_cols[..n_cols] {
            for r in 0..height {
                mask[r * width + c] = true;
            }
        }
    }
    GoldStandard::from_mask(ds.clone(), eval_mask)
}

/// Ising-like masks: the external field is calibrated once from `seed`,
/// then every image draws its own lattice at that field.
pub fn corrupt_ising(
    ds: &TabularDataset,
    target_fraction: f64,
    coupling: f64,
    sweeps: usize,
    height: usize,
    width: usize,
    seed: u64,
) -> Result<GoldStandard> {
    check_image_shape(ds, height, width)?;
    let calibrated = ising_mask(height, width, target_fraction, coupling, sweeps, seed)?;
    let mut eval_mask = Vec::with_capacity(ds.n_cells());
    for img in 0..ds.n_samples() {
        let s = derive_seed(seed, "ising-image", img as u64);
        eval_mask.extend(ising_sample(height, width, coupling, calibrated.field, sweeps, s));
    }
    GoldStandard::from_mask(ds.clone(), eval_mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ColumnSchema;
    use proptest::prelude::*;

    fn table(rows: usize, cols: usize) -> TabularDataset {
        let schema = (0..cols).map(|c| ColumnSchema::continuous(format!("c{c}"))).collect();
        TabularDataset::fully_observed(schema, (0..rows * cols).map(|i| i as f64).collect()).unwrap()
    }

    #[test]
    fn exact_cell_counts() {
        let ds = table(1000, 200);
        assert_eq!(corrupt_cells(&ds, 0.0001, 1).unwrap().eval_count(), 20);
        let g = corrupt_cells(&ds, 0.3, 2).unwrap();
        assert_eq!(g.eval_count(), 60_000);
        assert_eq!(g.corrupted.missing_count(), 60_000);
        assert_eq!(g.eval_mask, corrupt_cells(&ds, 0.3, 2).unwrap().eval_mask);
        assert!(corrupt_cells(&ds, 0.0, 2).is_err());
        assert!(corrupt_cells(&ds, 1.0, 2).is_err());
    }

    #[test]
    fn line_counts() {
        let ds = table(3, 784);
        let g = corrupt_lines(&ds, 0.5, 28, 28, 4).unwrap();
        for img in 0..3 {
            let n = g.eval_mask[img * 784..(img + 1) * 784].iter().filter(|&&m| m).count();
            assert_eq!(n, 343);
        }
        let g = corrupt_lines(&ds, 2.0 / 28.0, 28, 28, 4).unwrap();
        assert_eq!(g.eval_count(), 3 * 55);
        let g = corrupt_lines(&ds, 0.05, 28, 28, 4).unwrap();
        assert_eq!(g.eval_count(), 0);
        assert_eq!(g.corrupted, ds);
        assert!(corrupt_lines(&table(2, 10), 0.5, 28, 28, 4).is_err());
    }

    #[test]
    fn lines_drawn_per_image() {
        let g = corrupt_lines(&table(20, 784), 0.5, 28, 28, 8).unwrap();
        let first = &g.eval_mask[..784];
        assert!((1..20).any(|i| &g.eval_mask[i * 784..(i + 1) * 784] != first));
    }

    proptest! {
        #[test]
        fn corrupted_matches_original_off_mask(
            rows in 2usize..30, cols in 1usize..8, fraction in 0.01f64..0.99, seed in any::<u64>(),
            pre in prop::collection::vec(any::<bool>(), 240)
        ) {
            let base = table(rows, cols);
            let n = rows * cols;
            let premissing: Vec<bool> = pre[..n].iter().enumerate().map(|(i, &m)| m && i % 3 == 0).collect();
            let ds = TabularDataset::new(base.schema().to_vec(), base.values().to_vec(), premissing.clone()).unwrap();
            let g = corrupt_cells(&ds, fraction, seed).unwrap();
            let observed = ds.observed_count();
            prop_assert_eq!(g.eval_count(), (fraction * observed as f64).floor() as usize);
            for i in 0..n {
                prop_assert!(!(g.eval_mask[i] && premissing[i]));
                if g.eval_mask[i] {
                    prop_assert!(g.corrupted.missing_mask()[i]);
                } else {
                    prop_assert_eq!(g.corrupted.missing_mask()[i], ds.missing_mask()[i]);
                    prop_assert_eq!(g.corrupted.values()[i].to_bits(), ds.values()[i].to_bits());
                }
            }
        }
    }
}
