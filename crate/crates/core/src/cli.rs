//! Command-line front end: `generate`, `train`, `evaluate`, `compare`.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbeta_lp::train_f1_lp;
use crate::io::{
    label_values, load_csv, load_model, save_csv, save_json, save_model, stratified_split, LabelMapping,
};
use crate::metrics::{report, write_pr_csv, write_roc_csv, ReportOptions, ScoredSet};
use crate::model::{LabeledDataset, MetricsReport, ObjectiveSpec, ThresholdedScorer};
use crate::optimizer::{report_options_for, train, TrainConfig, TrainTrace};
use crate::synthetic::{generate, Generator, SyntheticSpec};

#[derive(Debug, Parser)]
#[command(name = "rankopt", version, about = "Train and evaluate linear scorers for ranking metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset as CSV.
    Generate(GenerateArgs),
    /// Train a scorer and write the model, trace and validation report.
    Train(TrainArgs),
    /// Exact metrics of a model on a dataset.
    Evaluate(EvaluateArgs),
    /// Per-metric gains of each model over the first one.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "two-gaussians-fig1")]
    pub generator: GeneratorArg,
    #[arg(long, default_value_t = 600)]
    pub n_pos: usize,
    #[arg(long, default_value_t = 1400)]
    pub n_neg: usize,
    #[arg(long, default_value_t = 2)]
    pub dimension: usize,
    #[arg(long, default_value_t = 1.0)]
    pub overlap: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GeneratorArg {
    TwoGaussiansFig1,
    Separable,
    UniformNoise,
}

impl From<GeneratorArg> for Generator {
    fn from(g: GeneratorArg) -> Self {
        match g {
            GeneratorArg::TwoGaussiansFig1 => Generator::TwoGaussiansFig1,
            GeneratorArg::Separable => Generator::Separable,
            GeneratorArg::UniformNoise => Generator::UniformNoise,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveName {
    /// recall at precision >= alpha
    Rap,
    /// precision at recall >= beta
    Par,
    Aucpr,
    Aucroc,
    Fbeta,
    Hinge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Sgd,
    /// Exact surrogate-F1 optimum via the linear program (F1 only).
    Lp,
}

/// Training config file. Every field is optional; command-line flags take
/// precedence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub objective: Option<ObjectiveName>,
    pub target: Option<f64>,
    pub anchors: Option<usize>,
    pub anchor_range: Option<(f64, f64)>,
    pub epsilon_cap: f64,
    #[serde(flatten)]
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            objective: None,
            target: None,
            anchors: None,
            anchor_range: None,
            epsilon_cap: 0.05,
            train: TrainConfig::default(),
        }
    }
}

pub const DEFAULT_ANCHORS: usize = 10;
pub const VAL_FRACTION: f64 = 0.2;

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub objective: Option<ObjectiveName>,
    /// Precision target for `rap`.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Recall target for `par`, or the F-beta weight for `fbeta`.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Number of anchors for `aucpr` / `aucroc`.
    #[arg(long)]
    pub anchors: Option<usize>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model output; with `--one-vs-all` the class value is inserted before
    /// the extension.
    #[arg(long)]
    pub out: PathBuf,
    /// Trace output as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Validation report output (stdout when absent).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Validation set; otherwise a seeded stratified 80/20 split is used.
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Write the validation split actually used as CSV.
    #[arg(long)]
    pub val_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "sgd")]
    pub method: Method,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub positive_class: Option<String>,
    /// Train one binary model per distinct label value.
    #[arg(long, conflicts_with = "positive_class")]
    pub one_vs_all: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Also report the best recall at precision >= alpha.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Also report the best precision at recall >= beta.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Weight of the F-beta score in the report.
    #[arg(long)]
    pub f_beta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub threshold_index: usize,
    #[arg(long)]
    pub pr_curve: Option<PathBuf>,
    #[arg(long)]
    pub roc_curve: Option<PathBuf>,
    /// Report output (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub positive_class: Option<String>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Baseline first.
    #[arg(long, num_args = 2.., required = true)]
    pub models: Vec<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub positive_class: Option<String>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Compare(a) => cmd_compare(a),
    }
}

/// Exit code for a command result: 0 ok, 2 bad input, 1 anything else.
pub fn exit_code(result: &Result<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(e) if e.is_bad_input() => 2,
        Err(_) => 1,
    }
}

fn mapping(positive_class: &Option<String>) -> LabelMapping {
    positive_class
        .clone()
        .map_or(LabelMapping::Binary, LabelMapping::PositiveClass)
}

fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => save_json(value, p),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let spec = SyntheticSpec {
        generator: a.generator.into(),
        n_pos: a.n_pos,
        n_neg: a.n_neg,
        dimension: a.dimension,
        overlap: a.overlap,
        seed: a.seed,
    };
    let data = generate(&spec)?;
    save_csv(&data, &a.out)?;
    info!("wrote {} examples to {}", data.len(), a.out.display());
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => Ok(serde_json::from_reader(std::io::BufReader::new(File::open(p)?))?),
        None => Ok(RunConfig::default()),
    }
}

/// Resolves the objective from flags over config for a training set.
pub fn resolve_objective(
    name: ObjectiveName,
    alpha: Option<f64>,
    beta: Option<f64>,
    cfg: &RunConfig,
    train_data: &LabeledDataset,
) -> Result<ObjectiveSpec> {
    let missing = |flag: &str| Error::InvalidArgument(format!("objective {name:?} needs --{flag}"));
    let k = cfg.anchors.unwrap_or(DEFAULT_ANCHORS);
    match name {
        ObjectiveName::Rap => {
            let alpha = alpha.or(cfg.target).ok_or_else(|| missing("alpha"))?;
            ObjectiveSpec::recall_at_precision(alpha, train_data.prior())
        }
        ObjectiveName::Par => {
            let beta = beta.or(cfg.target).ok_or_else(|| missing("beta"))?;
            ObjectiveSpec::precision_at_recall(beta)
        }
        ObjectiveName::Aucpr => ObjectiveSpec::aucpr(k, train_data.prior(), cfg.anchor_range, cfg.epsilon_cap),
        ObjectiveName::Aucroc => ObjectiveSpec::aucroc(k, cfg.anchor_range, cfg.epsilon_cap),
        ObjectiveName::Fbeta => ObjectiveSpec::fbeta(beta.or(cfg.target).unwrap_or(1.0)),
        ObjectiveName::Hinge => Ok(ObjectiveSpec::hinge()),
    }
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        cfg.train.seed = seed;
    }
    if let Some(steps) = a.steps {
        cfg.train.steps = steps;
    }
    if a.anchors.is_some() {
        cfg.anchors = a.anchors;
    }
    let name = a
        .objective
        .or(cfg.objective)
        .ok_or_else(|| Error::InvalidArgument("no objective given (flag or config)".into()))?;

    if a.one_vs_all {
        for class in label_values(&a.data)? {
            let out = with_suffix(&a.out, &class);
            let trace = a.trace.as_deref().map(|p| with_suffix(p, &class));
            let rep = a.report.as_deref().map(|p| with_suffix(p, &class));
            let val_out = a.val_out.as_deref().map(|p| with_suffix(p, &class));
            info!("one-vs-all: class {class}");
            let paths = TrainPaths {
                out: &out,
                trace: trace.as_deref(),
                report: rep.as_deref(),
                val_out: val_out.as_deref(),
            };
            train_one(&a, name, &cfg, &LabelMapping::PositiveClass(class.clone()), &paths)?;
        }
        Ok(())
    } else {
        let paths = TrainPaths {
            out: &a.out,
            trace: a.trace.as_deref(),
            report: a.report.as_deref(),
            val_out: a.val_out.as_deref(),
        };
        train_one(&a, name, &cfg, &mapping(&a.positive_class), &paths)
    }
}

struct TrainPaths<'a> {
    out: &'a Path,
    trace: Option<&'a Path>,
    report: Option<&'a Path>,
    val_out: Option<&'a Path>,
}

/// `model.json` + `cat` -> `model.cat.json`.
fn with_suffix(path: &Path, class: &str) -> PathBuf {
    let safe: String = class
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{safe}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{safe}"),
    };
    path.with_file_name(name)
}

fn train_one(
    a: &TrainArgs,
    name: ObjectiveName,
    cfg: &RunConfig,
    mapping: &LabelMapping,
    paths: &TrainPaths<'_>,
) -> Result<()> {
    let data = load_csv(&a.data, mapping)?;
    let (train_data, val_data) = match &a.val {
        Some(p) => (data, load_csv(p, mapping)?),
        None => stratified_split(&data, VAL_FRACTION, cfg.train.seed)?,
    };
    if let Some(p) = paths.val_out {
        save_csv(&val_data, p)?;
    }
    let objective = resolve_objective(name, a.alpha, a.beta, cfg, &train_data)?;
    let opts = report_options_for(&objective);

    let (scorer, trace): (ThresholdedScorer, TrainTrace) = match a.method {
        Method::Sgd => {
            let out = train(&train_data, &objective, &cfg.train, Some(&val_data))?;
            (out.state.scorer, out.trace)
        }
        Method::Lp => {
            if name != ObjectiveName::Fbeta || objective.target != 1.0 {
                return Err(Error::InvalidArgument(
                    "--method lp solves the F1 objective only (--objective fbeta --beta 1)".into(),
                ));
            }
            let (scorer, sol) = train_f1_lp(&train_data)?;
            info!("LP optimum {:.6} after {} pivots", sol.objective, sol.pivots);
            (scorer, TrainTrace::default())
        }
    };
    save_model(&scorer, paths.out)?;
    if let Some(p) = paths.trace {
        trace.write_jsonl(BufWriter::new(File::create(p)?))?;
    }
    let rep = match trace.last().and_then(|r| r.metrics.clone()) {
        Some(m) => m,
        None => report(&scorer, &val_data, &opts)?,
    };
    emit_json(&rep, paths.report)
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let scorer = load_model(&a.model)?;
    let data = load_csv(&a.data, &mapping(&a.positive_class))?;
    let opts = ReportOptions {
        threshold_index: a.threshold_index,
        beta: a.f_beta,
        alpha: a.alpha,
        beta_recall: a.beta,
        include_curve: false,
    };
    let rep = report(&scorer, &data, &opts)?;
    if a.pr_curve.is_some() || a.roc_curve.is_some() {
        let scored = ScoredSet::from_scorer(&scorer, &data)?;
        if let Some(p) = &a.pr_curve {
            write_pr_csv(&scored.pr_curve(), BufWriter::new(File::create(p)?))?;
        }
        if let Some(p) = &a.roc_curve {
            write_roc_csv(&scored.roc_curve(), BufWriter::new(File::create(p)?))?;
        }
    }
    emit_json(&rep, a.out.as_deref())
}

/// Metrics tabulated by `compare`, as fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub model: String,
    pub average_precision: f64,
    pub auc_roc: f64,
    pub precision_at_recall_0_7: f64,
    pub precision_at_recall_0_95: f64,
    pub recall_at_precision_0_7: f64,
    pub recall_at_precision_0_95: f64,
    pub accuracy: f64,
}

impl CompareRow {
    fn from_report(model: String, r: &MetricsReport, scored: &ScoredSet) -> Self {
        Self {
            model,
            average_precision: r.average_precision,
            auc_roc: r.auc_roc,
            precision_at_recall_0_7: scored.exact_precision_at_recall(0.7).0,
            precision_at_recall_0_95: scored.exact_precision_at_recall(0.95).0,
            recall_at_precision_0_7: scored.exact_recall_at_precision(0.7).0,
            recall_at_precision_0_95: scored.exact_recall_at_precision(0.95).0,
            accuracy: r.accuracy,
        }
    }

    /// `100 * (self - base)` for every metric.
    fn gain_over(&self, base: &CompareRow) -> CompareRow {
        let g = |a: f64, b: f64| 100.0 * (a - b);
        CompareRow {
            model: self.model.clone(),
            average_precision: g(self.average_precision, base.average_precision),
            auc_roc: g(self.auc_roc, base.auc_roc),
            precision_at_recall_0_7: g(self.precision_at_recall_0_7, base.precision_at_recall_0_7),
            precision_at_recall_0_95: g(self.precision_at_recall_0_95, base.precision_at_recall_0_95),
            recall_at_precision_0_7: g(self.recall_at_precision_0_7, base.recall_at_precision_0_7),
            recall_at_precision_0_95: g(self.recall_at_precision_0_95, base.recall_at_precision_0_95),
            accuracy: g(self.accuracy, base.accuracy),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: String,
    pub metrics: Vec<CompareRow>,
    /// Absolute percentage-point gains of each non-baseline model.
    pub gains: Vec<CompareRow>,
}

pub fn compare_models(models: &[(String, ThresholdedScorer)], data: &LabeledDataset) -> Result<Comparison> {
    if models.len() < 2 {
        return Err(Error::InvalidArgument("compare needs at least two models".into()));
    }
    let rows = models
        .iter()
        .map(|(name, scorer)| {
            let r = report(scorer, data, &ReportOptions::default())?;
            let scored = ScoredSet::from_scorer(scorer, data)?;
            Ok(CompareRow::from_report(name.clone(), &r, &scored))
        })
        .collect::<Result<Vec<_>>>()?;
    let gains = rows[1..].iter().map(|r| r.gain_over(&rows[0])).collect();
    Ok(Comparison {
        baseline: rows[0].model.clone(),
        metrics: rows,
        gains,
    })
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let data = load_csv(&a.data, &mapping(&a.positive_class))?;
    let models = a
        .models
        .iter()
        .map(|p| Ok((p.display().to_string(), load_model(p)?)))
        .collect::<Result<Vec<_>>>()?;
    emit_json(&compare_models(&models, &data)?, a.out.as_deref())
}
