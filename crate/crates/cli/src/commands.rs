use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use sdai::artifact::{load_model, save_model};
use sdai::baselines::{impute_knn, impute_mean, KnnParams};
use sdai::corruption::{
    corrupt, write_mask_csv, write_pgm, CorruptionKind, CorruptionSpec, GoldStandard, DEFAULT_COUPLING,
    DEFAULT_SWEEPS,
};
use sdai::data::{
    block_layout, format_float, generate_blobs, generate_synthetic, load_csv, load_schema, save_schema, write_csv,
    BlobSpec, BlockKind, ColumnSchema, DecodeMode, SyntheticSpec, TabularDataset,
};
use sdai::eval::{benchmark, random_search, write_report_csv, BenchmarkConfig, Scheme, SearchSpace};
use sdai::numerics::DenseMatrix;
use sdai::sdai::{fit_with, FitOptions, Hyperparams};

use crate::config::{push, resolve, Override};
use crate::{CliError, Command, GlobalArgs};

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    #[default]
    Sine,
    Blobs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateSettings {
    pub kind: DataKind,
    /// Rows for `sine`, images for `blobs`.
    pub n_samples: usize,
    pub n_features: usize,
    pub frequencies: Vec<u32>,
    pub noise_sigma: f64,
    pub height: usize,
    pub width: usize,
    pub max_blobs: usize,
    pub seed: u64,
}

impl Default for GenerateSettings {
    fn default() -> Self {
        Self {
            kind: DataKind::Sine,
            n_samples: 1000,
            n_features: 200,
            frequencies: vec![1],
            noise_sigma: 0.1,
            height: 28,
            width: 28,
            max_blobs: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeName {
    #[default]
    Cells,
    Lines,
    Ising,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorruptSettings {
    pub input: PathBuf,
    pub schema: PathBuf,
    pub scheme: SchemeName,
    pub fraction: f64,
    /// `[height, width]`; required by `lines` and `ising`.
    pub image_shape: Option<[usize; 2]>,
    pub coupling: f64,
    pub sweeps: usize,
    pub seed: u64,
}

impl Default for CorruptSettings {
    fn default() -> Self {
        Self {
            input: PathBuf::new(),
            schema: PathBuf::new(),
            scheme: SchemeName::Cells,
            fraction: 0.3,
            image_shape: None,
            coupling: DEFAULT_COUPLING,
            sweeps: DEFAULT_SWEEPS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    pub input: PathBuf,
    pub schema: PathBuf,
    pub hyperparams: Hyperparams,
    /// Layer-wise pre-training before fine-tuning.
    pub pretrain: bool,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            input: PathBuf::new(),
            schema: PathBuf::new(),
            hyperparams: Hyperparams::default(),
            pretrain: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImputeMethod {
    #[default]
    Sdai,
    Knn,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImputeSettings {
    pub input: PathBuf,
    pub schema: PathBuf,
    pub method: ImputeMethod,
    /// Model artifact; required by `sdai`.
    pub model: Option<PathBuf>,
    pub k: usize,
    pub lambda: f64,
    /// Also write per-entry probabilities in the encoded layout.
    pub probabilities: bool,
}

impl Default for ImputeSettings {
    fn default() -> Self {
        Self {
            input: PathBuf::new(),
            schema: PathBuf::new(),
            method: ImputeMethod::Sdai,
            model: None,
            k: 5,
            lambda: 1.0,
            probabilities: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkSettings {
    pub input: PathBuf,
    pub schema: PathBuf,
    pub benchmark: BenchmarkConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSettings {
    pub input: PathBuf,
    pub schema: PathBuf,
    pub space: SearchSpace,
    pub inner_folds: usize,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            input: PathBuf::new(),
            schema: PathBuf::new(),
            space: SearchSpace::default(),
            inner_folds: 5,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Data CSV.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Schema JSON sidecar.
    #[arg(long)]
    schema: Option<PathBuf>,
}

impl DataArgs {
    fn overrides(&self, out: &mut Vec<Override>) {
        push(out, "input", &self.input);
        push(out, "schema", &self.schema);
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// sine or blobs.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    n_features: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    frequencies: Option<Vec<u32>>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    max_blobs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct CorruptArgs {
    #[command(flatten)]
    data: DataArgs,
    /// cells, lines or ising.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    fraction: Option<f64>,
    /// HEIGHT,WIDTH
    #[arg(long, value_delimiter = ',')]
    image_shape: Option<Vec<usize>>,
    #[arg(long)]
    coupling: Option<f64>,
    #[arg(long)]
    sweeps: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_delimiter = ',')]
    encoder_sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    dropout_probs: Option<Vec<f64>>,
    #[arg(long)]
    l2_lambda: Option<f64>,
    #[arg(long)]
    pretrain_noise_fraction: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// sgd, nesterov, rmsprop or adam.
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    pretrain_epochs: Option<usize>,
    #[arg(long)]
    finetune_epochs: Option<usize>,
    /// tanh or relu.
    #[arg(long)]
    hidden_activation: Option<String>,
    /// Start fine-tuning from random weights.
    #[arg(long)]
    no_pretrain: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ImputeArgs {
    #[command(flatten)]
    data: DataArgs,
    /// sdai, knn or mean.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    probabilities: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated subset of sdai, knn, mean.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,
    /// cells, lines or ising.
    #[arg(long)]
    scheme: Option<String>,
    /// HEIGHT,WIDTH
    #[arg(long, value_delimiter = ',')]
    image_shape: Option<Vec<usize>>,
    #[arg(long)]
    outer_folds: Option<usize>,
    #[arg(long)]
    inner_folds: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    inner_folds: Option<usize>,
}

pub(crate) fn dispatch(global: &GlobalArgs, command: Command) -> Result<()> {
    let file = global.config.as_deref();
    let out = global.out_dir.as_path();
    let mut ov = Vec::new();
    match command {
        Command::Generate(a) => {
            push(&mut ov, "kind", &a.kind);
            push(&mut ov, "n_samples", &a.n_samples);
            push(&mut ov, "n_features", &a.n_features);
            push(&mut ov, "frequencies", &a.frequencies);
            push(&mut ov, "noise_sigma", &a.noise_sigma);
            push(&mut ov, "height", &a.height);
            push(&mut ov, "width", &a.width);
            push(&mut ov, "max_blobs", &a.max_blobs);
            push(&mut ov, "seed", &global.seed);
            let s: GenerateSettings = resolve(file, ov)?;
            echo(out, &s)?;
            generate(&s, out)
        }
        Command::Corrupt(a) => {
            a.data.overrides(&mut ov);
            push(&mut ov, "scheme", &a.scheme);
            push(&mut ov, "fraction", &a.fraction);
            push(&mut ov, "image_shape", &a.image_shape);
            push(&mut ov, "coupling", &a.coupling);
            push(&mut ov, "sweeps", &a.sweeps);
            push(&mut ov, "seed", &global.seed);
            let s: CorruptSettings = resolve(file, ov)?;
            echo(out, &s)?;
            corrupt_command(&s, out)
        }
        Command::Train(a) => {
            a.data.overrides(&mut ov);
            push(&mut ov, "hyperparams.encoder_sizes", &a.encoder_sizes);
            push(&mut ov, "hyperparams.dropout_probs", &a.dropout_probs);
            push(&mut ov, "hyperparams.l2_lambda", &a.l2_lambda);
            push(&mut ov, "hyperparams.pretrain_noise_fraction", &a.pretrain_noise_fraction);
            push(&mut ov, "hyperparams.learning_rate", &a.learning_rate);
            push(&mut ov, "hyperparams.optimizer", &a.optimizer);
            push(&mut ov, "hyperparams.batch_size", &a.batch_size);
            push(&mut ov, "hyperparams.pretrain_epochs", &a.pretrain_epochs);
            push(&mut ov, "hyperparams.finetune_epochs", &a.finetune_epochs);
            push(&mut ov, "hyperparams.hidden_activation", &a.hidden_activation);
            push(&mut ov, "hyperparams.seed", &global.seed);
            if a.no_pretrain {
                ov.push(("pretrain", Value::Bool(false)));
            }
            let s: TrainSettings = resolve(file, ov)?;
            echo(out, &s)?;
            train(&s, out)
        }
        Command::Impute(a) => {
            a.data.overrides(&mut ov);
            push(&mut ov, "method", &a.method);
            push(&mut ov, "model", &a.model);
            push(&mut ov, "k", &a.k);
            push(&mut ov, "lambda", &a.lambda);
            if a.probabilities {
                ov.push(("probabilities", Value::Bool(true)));
            }
            let s: ImputeSettings = resolve(file, ov)?;
            echo(out, &s)?;
            impute(&s, out)
        }
        Command::Benchmark(a) => {
            a.data.overrides(&mut ov);
            push(&mut ov, "benchmark.methods", &a.methods);
            push(&mut ov, "benchmark.fractions", &a.fractions);
            if let Some(name) = &a.scheme {
                let scheme = match parse_enum::<SchemeName>("benchmark.scheme", name)? {
                    SchemeName::Cells => Scheme::Cells,
                    SchemeName::Lines => Scheme::Lines,
                    SchemeName::Ising => Scheme::ising_default(),
                };
                ov.push(("benchmark.scheme", serde_json::to_value(scheme).expect("scheme serialises")));
            }
            push(&mut ov, "benchmark.image_shape", &a.image_shape);
            push(&mut ov, "benchmark.cv.outer_folds", &a.outer_folds);
            push(&mut ov, "benchmark.cv.inner_folds", &a.inner_folds);
            push(&mut ov, "benchmark.space.trials", &a.trials);
            push(&mut ov, "benchmark.seed", &global.seed);
            let s: BenchmarkSettings = resolve(file, ov)?;
            echo(out, &s)?;
            benchmark_command(&s, out)
        }
        Command::Search(a) => {
            a.data.overrides(&mut ov);
            push(&mut ov, "space.trials", &a.trials);
            push(&mut ov, "inner_folds", &a.inner_folds);
            push(&mut ov, "space.seed", &global.seed);
            let s: SearchSettings = resolve(file, ov)?;
            echo(out, &s)?;
            search(&s, out)
        }
    }
}

fn parse_enum<T: serde::de::DeserializeOwned>(key: &str, name: &str) -> Result<T> {
    serde_json::from_value(Value::String(name.to_owned())).map_err(|e| CliError::config(key, e.to_string()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(sdai::Error::from)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn echo<T: Serialize>(out: &Path, settings: &T) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    write_json(&out.join("config.json"), settings)
}

fn load_data(input: &Path, schema: &Path) -> Result<TabularDataset> {
    if input.as_os_str().is_empty() {
        return Err(CliError::config("input", "a data CSV is required".into()));
    }
    if schema.as_os_str().is_empty() {
        return Err(CliError::config("schema", "a schema JSON is required".into()));
    }
    let schema = load_schema(schema)?;
    Ok(load_csv(input, &schema)?)
}

fn generate(s: &GenerateSettings, out: &Path) -> Result<()> {
    let ds = match s.kind {
        DataKind::Sine => generate_synthetic(&SyntheticSpec {
            n_samples: s.n_samples,
            n_features: s.n_features,
            frequencies: s.frequencies.clone(),
            noise_sigma: s.noise_sigma,
            seed: s.seed,
        })?,
        DataKind::Blobs => generate_blobs(&BlobSpec {
            n_images: s.n_samples,
            height: s.height,
            width: s.width,
            max_blobs: s.max_blobs,
            seed: s.seed,
        })?,
    };
    write_csv(&ds, out.join("data.csv"))?;
    save_schema(ds.schema(), out.join("schema.json"))?;
    Ok(())
}

fn image_shape(shape: Option<[usize; 2]>, key: &str) -> Result<[usize; 2]> {
    shape.ok_or_else(|| CliError::config(key, "this corruption scheme needs an image shape".into()))
}

fn corrupt_command(s: &CorruptSettings, out: &Path) -> Result<()> {
    let ds = load_data(&s.input, &s.schema)?;
    let gold = if s.fraction == 0.0 {
        GoldStandard::identity(ds)
    } else {
        let kind = match s.scheme {
            SchemeName::Cells => CorruptionKind::Cells { fraction: s.fraction },
            SchemeName::Lines => {
                let [height, width] = image_shape(s.image_shape, "image_shape")?;
                CorruptionKind::Lines {
                    fraction: s.fraction,
                    height,
                    width,
                }
            }
            SchemeName::Ising => {
                let [height, width] = image_shape(s.image_shape, "image_shape")?;
                CorruptionKind::IsingMask {
                    target_fraction: s.fraction,
                    coupling: s.coupling,
                    sweeps: s.sweeps,
                    height,
                    width,
                }
            }
        };
        corrupt(&ds, &CorruptionSpec { kind, seed: s.seed })?
    };
    write_csv(&gold.corrupted, out.join("corrupted.csv"))?;
    save_schema(gold.corrupted.schema(), out.join("schema.json"))?;
    let path = out.join("eval_mask.csv");
    let mut w = create(&path)?;
    write_mask_csv(&gold.eval_mask, gold.original.n_columns(), &mut w)?;
    w.flush().map_err(|e| CliError::io(&path, e))?;
    if let Some([h, w]) = s.image_shape {
        let cols = gold.original.n_columns();
        if h * w == cols && gold.original.n_samples() > 0 {
            let path = out.join("mask.pgm");
            let mut f = create(&path)?;
            write_pgm(&gold.eval_mask[..cols], h, w, &mut f)?;
            f.flush().map_err(|e| CliError::io(&path, e))?;
        }
    }
    Ok(())
}

fn train(s: &TrainSettings, out: &Path) -> Result<()> {
    let ds = load_data(&s.input, &s.schema)?;
    let model = fit_with(&ds, &s.hyperparams, FitOptions { pretrain: s.pretrain })?;
    save_model(&model, out.join("model.json"))?;
    let path = out.join("loss_history.csv");
    let mut w = create(&path)?;
    let mut lines = String::from("epoch,loss\n");
    for (epoch, loss) in model.loss_history.iter().enumerate() {
        lines.push_str(&format!("{},{}\n", epoch + 1, format_float(*loss)));
    }
    w.write_all(lines.as_bytes())
        .and_then(|()| w.flush())
        .map_err(|e| CliError::io(&path, e))
}

/// Column names of the encoded layout: `name` for continuous and binary
/// columns, `name=label` for each categorical level.
fn encoded_header(schema: &[ColumnSchema]) -> Vec<String> {
    let mut names = Vec::new();
    for block in block_layout(schema) {
        let col = &schema[block.column];
        match block.kind {
            BlockKind::Categorical => names.extend(col.labels.iter().map(|l| format!("{}={l}", col.name))),
            _ => names.push(col.name.clone()),
        }
    }
    names
}

fn write_probabilities(schema: &[ColumnSchema], probs: &DenseMatrix, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(sdai::Error::from)?;
    w.write_record(encoded_header(schema)).map_err(sdai::Error::from)?;
    for r in 0..probs.rows() {
        w.write_record(probs.row(r).iter().map(|v| format_float(*v)))
            .map_err(sdai::Error::from)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn impute(s: &ImputeSettings, out: &Path) -> Result<()> {
    let ds = load_data(&s.input, &s.schema)?;
    let (imputed, probs) = match s.method {
        ImputeMethod::Sdai => {
            let path = s
                .model
                .as_ref()
                .ok_or_else(|| CliError::config("model", "method sdai needs a trained model file".into()))?;
            let model = load_model(path)?;
            let mode = if s.probabilities {
                DecodeMode::Probabilities
            } else {
                DecodeMode::Hard
            };
            let decoded = model.impute(&ds, mode)?;
            (decoded.dataset, decoded.probabilities)
        }
        ImputeMethod::Mean => {
            let imp = impute_mean(&ds)?;
            (imp.dataset, Some(imp.probabilities))
        }
        ImputeMethod::Knn => {
            let params = KnnParams { k: s.k, lambda: s.lambda };
            params
                .validate(ds.n_samples())
                .map_err(|e| CliError::config("k", e.to_string()))?;
            let imp = impute_knn(&ds, params)?;
            (imp.dataset, Some(imp.probabilities))
        }
    };
    write_csv(&imputed, out.join("imputed.csv"))?;
    if s.probabilities {
        if let Some(p) = probs {
            write_probabilities(imputed.schema(), &p, &out.join("probabilities.csv"))?;
        }
    }
    Ok(())
}

fn benchmark_command(s: &BenchmarkSettings, out: &Path) -> Result<()> {
    let ds = load_data(&s.input, &s.schema)?;
    let report = benchmark(&ds, &s.benchmark)?;
    let path = out.join("report.csv");
    let mut w = create(&path)?;
    write_report_csv(&report.rows, &mut w)?;
    w.flush().map_err(|e| CliError::io(&path, e))?;
    write_json(&out.join("report.json"), &report)
}

fn search(s: &SearchSettings, out: &Path) -> Result<()> {
    let ds = load_data(&s.input, &s.schema)?;
    let result = random_search(&s.space, &ds, s.inner_folds)?;
    write_json(&out.join("trials.json"), &result.trials)?;
    write_json(&out.join("best_config.json"), &result.best)
}
