use rand::seq::IndexedRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corruption::corrupt_cells;
use crate::data::{DecodeMode, TabularDataset};
use crate::numerics::{ActivationKind, OptimizerKind};
use crate::sdai::{fit, Hyperparams};
use crate::seed::{derive_rng, derive_seed, Rng};
use crate::{Error, Result};

use super::cv::{kfold_split, Fold};
use super::metrics::evaluate;

/// Fraction of a validation fold's known cells hidden to create a target.
pub const HOLDOUT_FRACTION: f64 = 0.1;

/// Description of the validation target, echoed into reports.
pub const VALIDATION_PROTOCOL: &str =
    "validation error = total imputation error on a further random 10% of each validation fold's known cells";

/// Candidate values for each hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub depths: Vec<usize>,
    /// Widths for every layer except the bottleneck.
    pub hidden_widths: Vec<usize>,
    pub bottleneck_widths: Vec<usize>,
    pub dropout_probs: Vec<f64>,
    pub l2_lambdas: Vec<f64>,
    pub noise_fractions: Vec<f64>,
    pub learning_rates: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub pretrain_epochs: Vec<usize>,
    pub finetune_epochs: Vec<usize>,
    pub activations: Vec<ActivationKind>,
    pub optimizers: Vec<OptimizerKind>,
    pub trials: usize,
    pub seed: u64,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            depths: vec![1, 2],
            hidden_widths: vec![32, 64, 100],
            bottleneck_widths: vec![2, 4, 8],
            dropout_probs: vec![0.0, 0.1, 0.2],
            l2_lambdas: vec![0.0, 1e-5, 1e-4],
            noise_fractions: vec![0.1, 0.2, 0.3],
            learning_rates: vec![1e-3, 3e-3],
            batch_sizes: vec![16, 32, 64],
            pretrain_epochs: vec![5, 10],
            finetune_epochs: vec![30, 60],
            activations: vec![ActivationKind::Tanh, ActivationKind::ReLU],
            optimizers: vec![OptimizerKind::Adam],
            trials: 20,
            seed: 0,
        }
    }
}

fn pick<T: Copy>(name: &str, values: &[T], rng: &mut Rng) -> Result<T> {
    values
        .choose(rng)
        .copied()
        .ok_or_else(|| Error::InvalidArgument(format!("search space field '{name}' is empty")))
}

impl SearchSpace {
    /// Draws one configuration whose bottleneck is narrower than
    /// `input_width`.
    pub fn sample(&self, input_width: usize, rng: &mut Rng) -> Result<Hyperparams> {
        let depth = pick("depths", &self.depths, rng)?;
        if depth == 0 {
            return Err(Error::InvalidArgument("search space depth 0".into()));
        }
        let mut sizes: Vec<usize> = (0..depth - 1)
            .map(|_| pick("hidden_widths", &self.hidden_widths, rng))
            .collect::<Result<_>>()?;
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        let limit = sizes.last().copied().unwrap_or(usize::MAX).min(input_width);
        let bottlenecks: Vec<usize> = self.bottleneck_widths.iter().copied().filter(|&b| b > 0 && b < limit).collect();
        if bottlenecks.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "no bottleneck width in {:?} is below {limit}",
                self.bottleneck_widths
            )));
        }
        sizes.push(pick("bottleneck_widths", &bottlenecks, rng)?);
        let dropout_probs = (0..depth)
            .map(|_| pick("dropout_probs", &self.dropout_probs, rng))
            .collect::<Result<_>>()?;
        let hp = Hyperparams {
            encoder_sizes: sizes,
            dropout_probs,
            l2_lambda: pick("l2_lambdas", &self.l2_lambdas, rng)?,
            pretrain_noise_fraction: pick("noise_fractions", &self.noise_fractions, rng)?,
            learning_rate: pick("learning_rates", &self.learning_rates, rng)?,
            optimizer: pick("optimizers", &self.optimizers, rng)?,
            batch_size: pick("batch_sizes", &self.batch_sizes, rng)?,
            pretrain_epochs: pick("pretrain_epochs", &self.pretrain_epochs, rng)?,
            finetune_epochs: pick("finetune_epochs", &self.finetune_epochs, rng)?,
            hidden_activation: pick("activations", &self.activations, rng)?,
            seed: 0,
        };
        hp.validate()?;
        Ok(hp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub hyperparams: Hyperparams,
    pub fold_errors: Vec<f64>,
    pub mean_error: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: Hyperparams,
    pub best_index: usize,
    pub best_error: f64,
    pub trials: Vec<Trial>,
}

/// Validation errors of one configuration over the inner folds.
pub fn cross_validate(hp: &Hyperparams, ds: &TabularDataset, folds: &[Fold], holdout_seed: u64) -> Result<Vec<f64>> {
    folds
        .iter()
        .enumerate()
        .map(|(fi, fold)| {
            let train = ds.select_rows(&fold.train);
            let val = ds.select_rows(&fold.test);
            let holdout = corrupt_cells(&val, HOLDOUT_FRACTION, derive_seed(holdout_seed, "holdout", fi as u64))?;
            let model = fit(&train, hp)?;
            let out = model.impute(&holdout.corrupted, DecodeMode::Probabilities)?;
            let report = evaluate("sdai", &holdout.original, &out.dataset, out.probabilities.as_ref(), &holdout.eval_mask)?;
            Ok(report.total_error)
        })
        .collect()
}

/// Random hyperparameter search scored by inner k-fold cross-validation.
/// Trials run in parallel; results do not depend on the thread count.
pub fn random_search(space: &SearchSpace, ds: &TabularDataset, inner_folds: usize) -> Result<SearchResult> {
    if space.trials == 0 {
        return Err(Error::InvalidArgument("search budget must be at least 1 trial".into()));
    }
    let width: usize = ds.schema().iter().map(|c| c.encoded_width()).sum();
    let mut rng = derive_rng(space.seed, "search", 0);
    let configs: Vec<Hyperparams> = (0..space.trials)
        .map(|i| {
            let mut hp = space.sample(width, &mut rng)?;
            hp.seed = derive_seed(space.seed, "trial", i as u64);
            Ok(hp)
        })
        .collect::<Result<_>>()?;
    let folds = kfold_split(ds.n_samples(), inner_folds, derive_seed(space.seed, "inner", 0))?;

    let trials: Vec<Trial> = configs
        .into_par_iter()
        .enumerate()
        .map(|(index, hyperparams)| match cross_validate(&hyperparams, ds, &folds, space.seed) {
            Ok(fold_errors) => {
                let mean = fold_errors.iter().sum::<f64>() / fold_errors.len() as f64;
                Trial {
                    index,
                    hyperparams,
                    mean_error: mean.is_finite().then_some(mean),
                    failure: (!mean.is_finite()).then(|| "non-finite validation error".to_string()),
                    fold_errors,
                }
            }
            Err(e) => Trial {
                index,
                hyperparams,
                fold_errors: Vec::new(),
                mean_error: None,
                failure: Some(e.to_string()),
            },
        })
        .collect();

    let best = trials
        .iter()
        .filter_map(|t| t.mean_error.map(|e| (e, t.index)))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let Some((best_error, best_index)) = best else {
        let reasons: Vec<String> = trials.iter().filter_map(|t| t.failure.clone()).collect();
        return Err(Error::AllTrialsFailed(reasons.join("; ")));
    };
    Ok(SearchResult {
        best: trials[best_index].hyperparams.clone(),
        best_index,
        best_error,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_respect_the_bottleneck() {
        let space = SearchSpace {
            bottleneck_widths: vec![2, 8, 50],
            depths: vec![1, 2, 3],
            ..SearchSpace::default()
        };
        let mut rng = derive_rng(1, "t", 0);
        for _ in 0..200 {
            let hp = space.sample(10, &mut rng).unwrap();
            assert!(hp.bottleneck() < 10);
            assert_eq!(hp.dropout_probs.len(), hp.encoder_sizes.len());
            assert!(hp.encoder_sizes.windows(2).all(|w| w[0] >= w[1]));
        }
        let narrow = SearchSpace { bottleneck_widths: vec![20], ..SearchSpace::default() };
        assert!(narrow.sample(10, &mut rng).is_err());
    }
}
