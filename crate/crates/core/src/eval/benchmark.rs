use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{impute_knn, impute_knn_multi, impute_mean, Imputation, KnnParams};
use crate::corruption::{corrupt, corrupt_cells, CorruptionKind, CorruptionSpec, GoldStandard, DEFAULT_COUPLING, DEFAULT_SWEEPS};
use crate::data::{format_float, DecodeMode, TabularDataset};
use crate::numerics::DenseMatrix;
use crate::sdai::{fit, Hyperparams};
use crate::seed::derive_seed;
use crate::{Error, Result};

use super::cv::CvPlan;
use super::metrics::{evaluate, EvalReport};
use super::search::{random_search, SearchSpace, HOLDOUT_FRACTION, VALIDATION_PROTOCOL};
use super::ssim::ssim;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sdai,
    Knn,
    Mean,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Sdai => "sdai",
            Method::Knn => "knn",
            Method::Mean => "mean",
        }
    }
}

/// How cells are removed; the fraction comes from the benchmark grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum Scheme {
    Cells,
    Lines,
    IsingMask { coupling: f64, sweeps: usize },
}

impl Default for Scheme {
    fn default() -> Self {
        Scheme::Cells
    }
}

impl Scheme {
    pub fn ising_default() -> Self {
        Scheme::IsingMask {
            coupling: DEFAULT_COUPLING,
            sweeps: DEFAULT_SWEEPS,
        }
    }

    pub fn spec(&self, fraction: f64, image_shape: Option<[usize; 2]>, seed: u64) -> Result<CorruptionSpec> {
        let shape = || {
            image_shape.ok_or_else(|| Error::InvalidArgument("image corruption schemes need image_shape".into()))
        };
        let kind = match *self {
            Scheme::Cells => CorruptionKind::Cells { fraction },
            Scheme::Lines => {
                let [height, width] = shape()?;
                CorruptionKind::Lines { fraction, height, width }
            }
            Scheme::IsingMask { coupling, sweeps } => {
                let [height, width] = shape()?;
                CorruptionKind::IsingMask {
                    target_fraction: fraction,
                    coupling,
                    sweeps,
                    height,
                    width,
                }
            }
        };
        Ok(CorruptionSpec { kind, seed })
    }
}

pub fn default_knn_grid() -> Vec<KnnParams> {
    let mut grid = Vec::new();
    for k in [1, 3, 5, 10, 20] {
        for lambda in [0.01, 0.1, 1.0, 10.0] {
            grid.push(KnnParams { k, lambda });
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub methods: Vec<Method>,
    pub fractions: Vec<f64>,
    pub scheme: Scheme,
    /// Row-major image shape; enables SSIM and the image corruption schemes.
    pub image_shape: Option<[usize; 2]>,
    pub cv: CvPlan,
    pub space: SearchSpace,
    /// Skip the inner search and train SDAi with these settings.
    pub sdai_fixed: Option<Hyperparams>,
    pub knn_grid: Vec<KnnParams>,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::Sdai, Method::Knn, Method::Mean],
            fractions: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            scheme: Scheme::Cells,
            image_shape: None,
            cv: CvPlan::default(),
            space: SearchSpace::default(),
            sdai_fixed: None,
            knn_grid: default_knn_grid(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub fraction: f64,
    pub fold: usize,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub method: String,
    pub fraction: f64,
    pub metric: String,
    pub mean: f64,
    /// Sample standard deviation over folds (0 for a single fold).
    pub std: f64,
    pub n_folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdaiSelection {
    pub fraction: f64,
    pub fold: usize,
    pub hyperparams: Hyperparams,
    pub validation_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnSelection {
    pub fraction: f64,
    pub params: KnnParams,
    pub validation_error: f64,
}

/// Rows visible to each stage of one outer fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub fraction: f64,
    pub fold: usize,
    pub test_rows: Vec<usize>,
    /// Rows handed to model selection and final training.
    pub selection_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<ReportRow>,
    pub summary: Vec<SummaryEntry>,
    pub sdai_selected: Vec<SdaiSelection>,
    pub knn_selected: Vec<KnnSelection>,
    pub folds: Vec<FoldRecord>,
    pub corruption: Vec<CorruptionSpec>,
    pub achieved_fractions: Vec<f64>,
    pub failures: Vec<String>,
    pub validation_protocol: String,
    pub seconds: f64,
}

impl BenchmarkReport {
    /// Fold-averaged value of `metric` for `method` at `fraction`.
    pub fn mean_metric(&self, method: Method, fraction: f64, metric: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.method == method.name() && s.fraction == fraction && s.metric == metric)
            .map(|s| s.mean)
    }
}

/// Chooses K-NN parameters by hiding 10% of the known cells of `ds` and
/// scoring every grid point on them.
pub fn select_knn(ds: &TabularDataset, grid: &[KnnParams], seed: u64) -> Result<(KnnParams, Vec<(KnnParams, f64)>)> {
    let grid: Vec<KnnParams> = grid.iter().copied().filter(|p| p.validate(ds.n_samples()).is_ok()).collect();
    if grid.is_empty() {
        return Err(Error::InvalidArgument("no usable K-NN parameters in the grid".into()));
    }
    let holdout = corrupt_cells(ds, HOLDOUT_FRACTION, seed)?;
    let outs = impute_knn_multi(&holdout.corrupted, &grid)?;
    let mut scored = Vec::with_capacity(grid.len());
    for (p, out) in grid.iter().zip(&outs) {
        let r = evaluate("knn", &holdout.original, &out.dataset, Some(&out.probabilities), &holdout.eval_mask)?;
        scored.push((*p, r.total_error));
    }
    let best = scored
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(a.0.cmp(&b.0)))
        .map(|(_, s)| s.0)
        .expect("non-empty grid");
    Ok((best, scored))
}

fn image_ssim(gold: &TabularDataset, imputed: &TabularDataset, [h, w]: [usize; 2]) -> Result<f64> {
    let n = gold.n_samples();
    let mut total = 0.0;
    for r in 0..n {
        total += ssim(gold.row(r), imputed.row(r), h, w)?;
    }
    Ok(total / n as f64)
}

fn report_rows(report: &EvalReport, fraction: f64, fold: usize) -> Vec<ReportRow> {
    let mut metrics = Vec::new();
    if let Some(v) = report.rmse_continuous {
        metrics.push(("rmse_continuous", v));
    }
    if let Some(v) = report.ce_binary {
        metrics.push(("ce_binary", v));
    }
    if let Some(v) = report.ce_categorical {
        metrics.push(("ce_categorical", v));
    }
    metrics.push(("total_error", report.total_error));
    if let Some(v) = report.ssim {
        metrics.push(("ssim", v));
    }
    metrics.push((
        "n_evaluated",
        (report.n_continuous + report.n_binary + report.n_categorical) as f64,
    ));
    metrics
        .into_iter()
        .map(|(metric, value)| ReportRow {
            method: report.method.clone(),
            fraction,
            fold,
            metric: metric.to_string(),
            value,
        })
        .collect()
}

fn score(
    method: Method,
    gold: &GoldStandard,
    imputed: &TabularDataset,
    probabilities: Option<&DenseMatrix>,
    config: &BenchmarkConfig,
) -> Result<EvalReport> {
    let mut report = evaluate(method.name(), &gold.original, imputed, probabilities, &gold.eval_mask)?;
    if let Some(shape) = config.image_shape {
        report.ssim = Some(image_ssim(&gold.original, imputed, shape)?);
    }
    Ok(report)
}

fn summarise(rows: &[ReportRow]) -> Vec<SummaryEntry> {
    let mut keys: Vec<(String, f64, String)> = Vec::new();
    for r in rows {
        let key = (r.method.clone(), r.fraction, r.metric.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(method, fraction, metric)| {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| r.method == method && r.fraction == fraction && r.metric == metric)
                .map(|r| r.value)
                .collect();
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            SummaryEntry {
                method,
                fraction,
                metric,
                mean,
                std,
                n_folds: n,
            }
        })
        .collect()
}

/// Nested cross-validation benchmark.
///
/// For every fraction the full dataset is corrupted once. SDAi selects its
/// hyperparameters on the outer training rows only, is retrained on them
/// and imputes the outer test rows. The baselines impute the full corrupted
/// table. Every method is scored on the same removed cells of each outer
/// test fold.
pub fn benchmark(ds: &TabularDataset, config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    let start = Instant::now();
    if ds.missing_count() != 0 {
        return Err(Error::InvalidArgument("benchmark needs a fully observed dataset as gold standard".into()));
    }
    if config.methods.is_empty() || config.fractions.is_empty() {
        return Err(Error::InvalidArgument("benchmark needs at least one method and one fraction".into()));
    }
    let mut rows = Vec::new();
    let mut sdai_selected = Vec::new();
    let mut knn_selected = Vec::new();
    let mut folds_log = Vec::new();
    let mut corruption = Vec::new();
    let mut achieved_fractions = Vec::new();
    let mut failures = Vec::new();

    for (fi, &fraction) in config.fractions.iter().enumerate() {
        let spec = config.scheme.spec(fraction, config.image_shape, derive_seed(config.seed, "corrupt", fi as u64))?;
        let gold = corrupt(ds, &spec)?;
        achieved_fractions.push(gold.achieved_fraction());
        corruption.push(spec);
        let outer = config.cv.outer_splits(ds.n_samples(), derive_seed(config.seed, "outer", fi as u64))?;

        let mut full: Vec<(Method, Imputation)> = Vec::new();
        for &method in &config.methods {
            match method {
                Method::Mean => full.push((method, impute_mean(&gold.corrupted)?)),
                Method::Knn => {
                    let (params, scored) =
                        select_knn(&gold.corrupted, &config.knn_grid, derive_seed(config.seed, "knn-select", fi as u64))?;
                    let validation_error = scored.iter().find(|s| s.0 == params).map(|s| s.1).unwrap_or(f64::NAN);
                    knn_selected.push(KnnSelection {
                        fraction,
                        params,
                        validation_error,
                    });
                    full.push((method, impute_knn(&gold.corrupted, params)?));
                }
                Method::Sdai => {}
            }
        }

        for (fold_idx, fold) in outer.iter().enumerate() {
            let test_gold = gold.select_rows(&fold.test);
            folds_log.push(FoldRecord {
                fraction,
                fold: fold_idx,
                test_rows: fold.test.clone(),
                selection_rows: fold.train.clone(),
            });
            if !test_gold.eval_mask.iter().any(|&m| m) {
                failures.push(format!("fraction {fraction}, fold {fold_idx}: no corrupted test cells"));
                continue;
            }
            for &method in &config.methods {
                let report = match method {
                    Method::Sdai => {
                        let train = gold.corrupted.select_rows(&fold.train);
                        let job = (fi * 1000 + fold_idx) as u64;
                        let selected = match &config.sdai_fixed {
                            Some(hp) => Ok((hp.clone(), None)),
                            None => {
                                let space = SearchSpace {
                                    seed: derive_seed(config.seed, "search", job),
                                    ..config.space.clone()
                                };
                                random_search(&space, &train, config.cv.inner_folds)
                                    .map(|r| (r.best, Some(r.best_error)))
                            }
                        };
                        let result = selected.and_then(|(hp, validation_error)| {
                            sdai_selected.push(SdaiSelection {
                                fraction,
                                fold: fold_idx,
                                hyperparams: hp.clone(),
                                validation_error,
                            });
                            let model = fit(&train, &hp)?;
                            let out = model.impute(&test_gold.corrupted, DecodeMode::Probabilities)?;
                            score(method, &test_gold, &out.dataset, out.probabilities.as_ref(), config)
                        });
                        match result {
                            Ok(r) => r,
                            Err(e) => {
                                failures.push(format!("sdai, fraction {fraction}, fold {fold_idx}: {e}"));
                                continue;
                            }
                        }
                    }
                    Method::Mean | Method::Knn => {
                        let imp = &full.iter().find(|(m, _)| *m == method).expect("baseline imputed").1;
                        let imputed = imp.dataset.select_rows(&fold.test);
                        let probs = imp.probabilities.select_rows(&fold.test);
                        score(method, &test_gold, &imputed, Some(&probs), config)?
                    }
                };
                rows.extend(report_rows(&report, fraction, fold_idx));
            }
        }
    }

    Ok(BenchmarkReport {
        summary: summarise(&rows),
        rows,
        sdai_selected,
        knn_selected,
        folds: folds_log,
        corruption,
        achieved_fractions,
        failures,
        validation_protocol: VALIDATION_PROTOCOL.to_string(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Long-format report: `method,fraction,fold,metric,value`.
pub fn write_report_csv<W: Write>(rows: &[ReportRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["method", "fraction", "fold", "metric", "value"])?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            format_float(r.fraction),
            r.fold.to_string(),
            r.metric.clone(),
            format_float(r.value),
        ])?;
    }
    w.flush()?;
    Ok(())
}
