use serde::{Deserialize, Serialize};

use crate::baselines::observed_probabilities;
use crate::corruption::CorruptionSpec;
use crate::data::{block_layout, TabularDataset, VariableKind};
use crate::numerics::DenseMatrix;
use crate::{Error, Result};

const PROB_FLOOR: f64 = 1e-12;

fn check_pair(gold: &TabularDataset, imputed: &TabularDataset, eval_mask: &[bool]) -> Result<()> {
    if gold.schema() != imputed.schema() || gold.n_samples() != imputed.n_samples() {
        return Err(Error::Shape("gold and imputed datasets differ in schema or size".into()));
    }
    if eval_mask.len() != gold.n_cells() {
        return Err(Error::Shape(format!(
            "eval mask has {} cells, dataset has {}",
            eval_mask.len(),
            gold.n_cells()
        )));
    }
    Ok(())
}

fn selected<'a>(gold: &'a TabularDataset, eval_mask: &'a [bool], kind: VariableKind) -> impl Iterator<Item = (usize, usize)> + 'a {
    let cols = gold.n_columns();
    eval_mask
        .iter()
        .enumerate()
        .filter(move |(i, &m)| m && gold.schema()[i % cols].kind == kind)
        .map(move |(i, _)| (i / cols, i % cols))
}

/// Root mean squared error over the continuous cells selected by `eval_mask`,
/// on the original scale.
pub fn rmse_masked(gold: &TabularDataset, imputed: &TabularDataset, eval_mask: &[bool]) -> Result<f64> {
    check_pair(gold, imputed, eval_mask)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (r, c) in selected(gold, eval_mask, VariableKind::Continuous) {
        let (Some(g), Some(p)) = (gold.get(r, c), imputed.get(r, c)) else {
            return Err(Error::InvalidArgument(format!("cell ({r}, {c}) is missing in gold or imputed data")));
        };
        sum += (g - p) * (g - p);
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidArgument("no continuous cells selected".into()));
    }
    Ok((sum / count as f64).sqrt())
}

/// Mean cross-entropy over selected binary cells or categorical blocks.
/// `probabilities` uses the encoded layout (P(1) for binary columns, class
/// probabilities for categorical blocks); values are clamped to
/// `[1e-12, 1 - 1e-12]`.
pub fn ce_masked(gold: &TabularDataset, probabilities: &DenseMatrix, eval_mask: &[bool], kind: VariableKind) -> Result<f64> {
    let blocks = block_layout(gold.schema());
    let width = blocks.last().map_or(0, |b| b.range.end);
    if probabilities.shape() != (gold.n_samples(), width) {
        return Err(Error::Shape(format!(
            "probability table {:?}, expected {:?}",
            probabilities.shape(),
            (gold.n_samples(), width)
        )));
    }
    if eval_mask.len() != gold.n_cells() {
        return Err(Error::Shape("eval mask size".into()));
    }
    let clamp = |p: f64| p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    let mut sum = 0.0;
    let mut count = 0usize;
    for (r, c) in selected(gold, eval_mask, kind) {
        let Some(truth) = gold.get(r, c) else {
            return Err(Error::InvalidArgument(format!("gold cell ({r}, {c}) is missing")));
        };
        let range = blocks[c].range.clone();
        let p = &probabilities.row(r)[range];
        sum += match kind {
            VariableKind::Binary => -(truth * clamp(p[0]).ln() + (1.0 - truth) * (1.0 - clamp(p[0])).ln()),
            VariableKind::Categorical => -clamp(p[truth as usize]).ln(),
            VariableKind::Continuous => {
                return Err(Error::InvalidArgument("cross-entropy needs a binary or categorical kind".into()))
            }
        };
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidArgument(format!("no {kind:?} cells selected")));
    }
    Ok(sum / count as f64)
}

/// Per-kind errors of one imputation against the gold standard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub rmse_continuous: Option<f64>,
    pub ce_binary: Option<f64>,
    pub ce_categorical: Option<f64>,
    /// Sum of the available per-kind errors.
    pub total_error: f64,
    pub ssim: Option<f64>,
    pub n_continuous: usize,
    pub n_binary: usize,
    pub n_categorical: usize,
    pub corruption: Option<CorruptionSpec>,
    pub seconds: f64,
}

/// Scores every selected cell. Without a probability table the hard
/// imputations are scored as one-hot predictions.
pub fn evaluate(
    method: &str,
    gold: &TabularDataset,
    imputed: &TabularDataset,
    probabilities: Option<&DenseMatrix>,
    eval_mask: &[bool],
) -> Result<EvalReport> {
    check_pair(gold, imputed, eval_mask)?;
    let count = |kind| selected(gold, eval_mask, kind).count();
    let (n_continuous, n_binary, n_categorical) =
        (count(VariableKind::Continuous), count(VariableKind::Binary), count(VariableKind::Categorical));
    if n_continuous + n_binary + n_categorical == 0 {
        return Err(Error::InvalidArgument("evaluation mask selects no cells".into()));
    }
    let hard;
    let probs = match probabilities {
        Some(p) => p,
        None => {
            hard = observed_probabilities(imputed);
            &hard
        }
    };
    let rmse_continuous = (n_continuous > 0).then(|| rmse_masked(gold, imputed, eval_mask)).transpose()?;
    let ce_binary = (n_binary > 0).then(|| ce_masked(gold, probs, eval_mask, VariableKind::Binary)).transpose()?;
    let ce_categorical =
        (n_categorical > 0).then(|| ce_masked(gold, probs, eval_mask, VariableKind::Categorical)).transpose()?;
    Ok(EvalReport {
        method: method.to_string(),
        total_error: rmse_continuous.unwrap_or(0.0) + ce_binary.unwrap_or(0.0) + ce_categorical.unwrap_or(0.0),
        rmse_continuous,
        ce_binary,
        ce_categorical,
        ssim: None,
        n_continuous,
        n_binary,
        n_categorical,
        corruption: None,
        seconds: 0.0,
    })
}
