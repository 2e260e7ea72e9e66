//! Metrics, statistical tests and the nested cross-validation benchmark.

mod benchmark;
mod cv;
mod metrics;
mod search;
mod ssim;
mod wilcoxon;

pub use benchmark::{
    benchmark, default_knn_grid, select_knn, write_report_csv, BenchmarkConfig, BenchmarkReport, FoldRecord,
    KnnSelection, Method, ReportRow, Scheme, SdaiSelection, SummaryEntry,
};
pub use cv::{kfold_split, CvPlan, Fold};
pub use metrics::{ce_masked, evaluate, rmse_masked, EvalReport};
pub use search::{cross_validate, random_search, SearchResult, SearchSpace, Trial, HOLDOUT_FRACTION, VALIDATION_PROTOCOL};
pub use ssim::{ssim, SSIM_WINDOW};
pub use wilcoxon::{wilcoxon_signed_rank, Alternative, WilcoxonResult, EXACT_LIMIT, MIN_NONZERO};
