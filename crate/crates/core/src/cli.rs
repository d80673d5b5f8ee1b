//! The `oakcrowd` command line: `gen`, `train`, `estimate` and `eval`.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::aggregate::AggregationMode;
use crate::dataset::{ingest, read_records, read_truth, write_jsonl, AuditorRecord, Dataset, Record};
use crate::error::{Error, Result};
use crate::estimate::Estimator;
use crate::eval::{curves_csv, curves_svg, default_grid, run_trials, EvalConfig, Method, DEFAULT_GRID_POINTS};
use crate::irt::FitOptions;
use crate::model::{EstimatorKind, Model, DEFAULT_ALPHA_SEMI, DEFAULT_GAMMA, DEFAULT_LAMBDA};
use crate::multipoint::{item_labels, run_pipeline};
use crate::partition::Partitioner;
use crate::similarity::SimilarityFn;
use crate::synth::{generate, GeneratorConfig};
use crate::train::{train, TrainConfig};

/// Exit status for bad usage, malformed input or invalid configuration.
pub const EXIT_USAGE: i32 = 2;
/// Exit status for every other failure.
pub const EXIT_FAILURE: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "oakcrowd", version, about = "Online accuracy estimation for crowdsourced annotations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset and its ground truth.
    Gen(GenArgs),
    /// Learn a model from annotations and optional auditor labels.
    Train(TrainArgs),
    /// Aggregate items and estimate the accuracy of each answer.
    Estimate(EstimateArgs),
    /// Sweep stopping thresholds and score cost–quality curves.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Generator configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output prefix; writes PREFIX.dataset.jsonl, PREFIX.truth.jsonl and
    /// PREFIX.auditor.jsonl.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Partitioner: default, single or grid:NX,NY,X0,Y0,X1,Y1.
    #[arg(long, default_value = "default")]
    pub partitioner: String,
    /// Similarity function as JSON, e.g. '{"fn":"gaussian","sigma":2}'.
    /// Defaults to the standard one for the label kind.
    #[arg(long)]
    pub similarity: Option<String>,
    /// Smoothing strength.
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,
    /// Weight of auditor evidence relative to agreement evidence.
    #[arg(long, default_value_t = DEFAULT_ALPHA_SEMI)]
    pub alpha_semi: f64,
    /// Relative smoothing toward the IRT prediction (poak-irt).
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    /// Learn decision-point adjustments up to this many labels.
    #[arg(long)]
    pub multipoint: Option<usize>,
    /// Decision-point fit: likelihood or logit_ols.
    #[arg(long, default_value = "likelihood")]
    pub shift_fit: String,
    /// Fit the IRT block to raw per-type cells instead of smoothed ones.
    #[arg(long)]
    pub irt_raw: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Annotation JSONL; lines with a "z" key are auditor labels.
    #[arg(long)]
    pub data: PathBuf,
    /// Extra auditor labels (JSONL of {"item","z"}).
    #[arg(long)]
    pub auditor: Option<PathBuf>,
    #[arg(long, default_value = "oak")]
    pub estimator: String,
    /// Aggregation rule recorded in the model: weight, uniform, sad or bau.
    #[arg(long, default_value = "weight")]
    pub aggregation: String,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Annotation JSONL to aggregate.
    #[arg(long)]
    pub labels: PathBuf,
    /// Stop thresholds, one per decision point (comma-separated). Without
    /// them every label is used.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Vec<f64>,
    /// Override the estimator recorded in the model.
    #[arg(long)]
    pub estimator: Option<String>,
    /// Predictions JSONL; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Annotation JSONL; auditor lines are visible to training.
    #[arg(long)]
    pub train: PathBuf,
    /// Ground truth used to score test items.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Extra auditor labels visible to training.
    #[arg(long)]
    pub auditor: Option<PathBuf>,
    #[arg(long, default_value_t = 0.3)]
    pub test_fraction: f64,
    #[arg(long, default_value = "poak-weight,poak-bau,oak-weight,oak-bau,poaki,poak-irt,sad,uniform")]
    pub methods: String,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of evenly spaced thresholds in [0, 1].
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    pub grid: usize,
    #[arg(long, default_value_t = crate::eval::DEFAULT_BOOTSTRAP)]
    pub bootstrap: usize,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Also write curves.svg.
    #[arg(long)]
    pub svg: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Format { .. }
        | Error::Validation(_)
        | Error::KindMismatch { .. }
        | Error::InvalidArgument(_)
        | Error::Json(_) => EXIT_USAGE,
        Error::Degenerate(_) | Error::MissingBlock(_) | Error::Io(_) => EXIT_FAILURE,
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Estimate(a) => cmd_estimate(&a),
        Command::Eval(a) => cmd_eval(&a),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let cfg: GeneratorConfig = serde_json::from_reader(open(&a.config)?)?;
    let s = generate(&cfg)?;
    write_jsonl(create(&with_suffix(&a.out, ".dataset.jsonl"))?, s.dataset.annotations())?;
    write_jsonl(create(&with_suffix(&a.out, ".truth.jsonl"))?, &s.truth)?;
    write_jsonl(create(&with_suffix(&a.out, ".auditor.jsonl"))?, s.dataset.auditor_records())?;
    Ok(())
}

/// Annotations plus auditor labels from the data file and an optional
/// auditor file.
pub fn load_dataset(data: &Path, auditor: Option<&Path>) -> Result<Dataset> {
    let records = read_records(open(data)?)?;
    let extra: Vec<AuditorRecord> = match auditor {
        Some(p) => read_truth(open(p)?)?
            .into_iter()
            .map(|(item, z)| AuditorRecord { item, z })
            .collect(),
        None => Vec::new(),
    };
    ingest(records, sorted(extra))
}

fn sorted(mut records: Vec<AuditorRecord>) -> Vec<AuditorRecord> {
    records.sort_by(|a, b| a.item.cmp(&b.item));
    records
}

fn parse_aggregation(s: &str) -> Result<AggregationMode> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| Error::InvalidArgument(format!("unknown aggregation '{s}'; valid: weight, uniform, sad, bau")))
}

fn train_config(ds: &Dataset, estimator: EstimatorKind, m: &ModelArgs) -> Result<TrainConfig> {
    let kind = ds
        .label_kind()
        .ok_or_else(|| Error::Degenerate("the dataset has no annotations".into()))?;
    let sim = match &m.similarity {
        Some(json) => {
            let sim: SimilarityFn = serde_json::from_str(json)
                .map_err(|e| Error::InvalidArgument(format!("bad --similarity: {e}")))?;
            sim.validate()?;
            sim
        }
        None => SimilarityFn::for_kind(kind),
    };
    let mut cfg = TrainConfig::new(estimator, sim);
    cfg.partitioner = Some(Partitioner::from_key(&m.partitioner, kind, ds.meta())?);
    cfg.gamma = m.gamma;
    cfg.alpha_semi = m.alpha_semi;
    cfg.lambda = m.lambda;
    cfg.irt = FitOptions {
        smoothed: !m.irt_raw,
        ..FitOptions::default()
    };
    cfg.multipoint = m.multipoint;
    cfg.shift_fit = serde_json::from_value(serde_json::Value::String(m.shift_fit.clone()))
        .map_err(|_| Error::InvalidArgument(format!("unknown shift fit '{}'; valid: likelihood, logit_ols", m.shift_fit)))?;
    Ok(cfg)
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let estimator: EstimatorKind = a.estimator.parse()?;
    let aggregation = parse_aggregation(&a.aggregation)?;
    let ds = load_dataset(&a.data, a.auditor.as_deref())?;
    let mut cfg = train_config(&ds, estimator, &a.model)?;
    cfg.aggregation = aggregation;
    let model = train(&ds, &cfg)?;
    let mut w = create(&a.out)?;
    w.write_all(model.to_json().as_bytes())?;
    w.flush()?;
    Ok(())
}

fn cmd_estimate(a: &EstimateArgs) -> Result<()> {
    let mut text = String::new();
    io::Read::read_to_string(&mut open(&a.model)?, &mut text)?;
    let model = Model::from_json(&text)?;
    let est = match &a.estimator {
        Some(key) => Estimator::new(&model, key.parse()?, model.meta.aggregation)?,
        None => Estimator::from_model(&model)?,
    };
    let records: Vec<Record> = read_records(open(&a.labels)?)?
        .into_iter()
        .filter(|r| matches!(r, Record::Annotation(_)))
        .collect();
    let ds = ingest(records, [])?;
    let thresholds = if a.thresholds.is_empty() { vec![1.0] } else { a.thresholds.clone() };
    let predictions = ds
        .items()
        .iter()
        .map(|item| run_pipeline(&item.id, &item_labels(&ds, item), &est, &thresholds))
        .collect::<Result<Vec<_>>>()?;
    match &a.out {
        Some(p) => write_jsonl(create(p)?, &predictions),
        None => write_jsonl(io::stdout().lock(), &predictions),
    }
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let methods = Method::parse_list(&a.methods)?;
    let ds = load_dataset(&a.train, a.auditor.as_deref())?;
    let truth = match &a.truth {
        Some(p) => read_truth(open(p)?)?,
        None => Default::default(),
    };
    let mut cfg = EvalConfig::new(methods, SimilarityFn::Hamming);
    cfg.train = train_config(&ds, EstimatorKind::Oak, &a.model)?;
    cfg.thresholds = default_grid(a.grid);
    cfg.test_fraction = a.test_fraction;
    cfg.trials = a.trials;
    cfg.seed = a.seed;
    cfg.bootstrap = a.bootstrap;
    let report = run_trials(&ds, &truth, &cfg)?;
    fs::create_dir_all(&a.out)?;
    let curves = report.mean_curves();
    fs::write(a.out.join("curves.csv"), curves_csv(&curves))?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    fs::write(a.out.join("rauc.json"), json)?;
    if a.svg {
        fs::write(a.out.join("curves.svg"), curves_svg(&curves))?;
    }
    for s in &report.summary {
        println!("{:<12} rauc {:+.4} [{:+.4}, {:+.4}]", s.method.key(), s.mean, s.ci_low, s.ci_high);
    }
    Ok(())
}
