//! Command-line front end: prototype placement, training, evaluation,
//! numerical checks and embedding export.
//!
//! [`run`] parses arguments and executes one command, returning the exit
//! code and the report instead of printing, so it can be driven from tests.

mod data_spec;
mod svg;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use busemann_core::data_io::{
    format_f64, read_prototypes, split_indices, write_metrics_jsonl, write_prototypes, Checkpoint, Dataset, SplitSpec,
    Standardizer,
};
use busemann_core::geometry::EuclideanVector;
use busemann_core::loss::{loss_gradient, LossGradient};
use busemann_core::model::{embed_dataset, evaluate, train, EvalReport, Model, TrainConfig};
use busemann_core::prototypes::{
    separation_metrics, separation_prototypes, uniform_circle_prototypes, SeparationMetrics, DEFAULT_SEPARATION_ITERS,
    DEFAULT_SEPARATION_LR,
};
use busemann_core::verify::{self, Suite, SuiteReport};
use busemann_core::{IdealPoint, PrototypeSet};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub use data_spec::DataSpec;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<busemann_core::Error> for CliError {
    fn from(e: busemann_core::Error) -> Self {
        use busemann_core::Error as E;
        match e {
            E::Io { .. } | E::Format { .. } | E::Parse { .. } | E::Json(_) => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

/// Outcome of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandResult {
    pub exit_code: i32,
    pub report: String,
}

#[derive(Debug, Parser)]
#[command(name = "busemann", version, about = "Hyperbolic classification with ideal prototypes")]
pub struct Cli {
    /// Print the report as JSON.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Place class prototypes on the ideal boundary and write them as CSV.
    Place(PlaceArgs),
    /// Train a network against fixed prototypes.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Run numerical verification suites.
    Check(CheckArgs),
    /// Export embeddings as CSV, or as an SVG picture of the disk.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Uniform,
    Separation,
}

#[derive(Debug, Args)]
pub struct PlaceArgs {
    #[arg(long)]
    pub classes: usize,
    #[arg(long)]
    pub dims: usize,
    /// Defaults to `uniform` for d = 2 and `separation` otherwise.
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long, default_value_t = DEFAULT_SEPARATION_ITERS)]
    pub iters: usize,
    #[arg(long, default_value_t = DEFAULT_SEPARATION_LR)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// csv:PATH:labelcol, idx:IMAGES:LABELS or blobs:C,I,per_class,scale,sigma,seed
    #[arg(long)]
    pub data: DataSpec,
    #[arg(long)]
    pub protos: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Metrics JSONL path; defaults to the checkpoint path with `.metrics.jsonl`.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Hidden layer widths, e.g. `64,32`. Empty means a linear model.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Vec<usize>,
    /// Model output dimension; defaults to the prototype dimension.
    #[arg(long)]
    pub out_dim: Option<usize>,
    #[arg(long, default_value_t = 5e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 5e-5)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    /// Epochs at which the learning rate is divided by `--lr-decay-factor`.
    #[arg(long, value_delimiter = ',')]
    pub lr_decay_epochs: Vec<usize>,
    #[arg(long, default_value_t = 10.0)]
    pub lr_decay_factor: f64,
    /// Penalty slope s, with φ = s · d.
    #[arg(long, default_value_t = 0.1)]
    pub slope: f64,
    /// Seed for initialization and shuffling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    #[arg(long)]
    pub no_stratify: bool,
    /// Standardize features with statistics of the training split.
    #[arg(long)]
    pub standardize: bool,
    /// Evaluate per-example terms in parallel; results may differ in the last bits.
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subset {
    All,
    Train,
    Validation,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: DataSpec,
    /// Prototype file; defaults to the one referenced by the checkpoint.
    #[arg(long)]
    pub protos: Option<PathBuf>,
    /// Which rows to use, by the split recorded in the checkpoint.
    #[arg(long, value_enum, default_value_t = Subset::All)]
    pub subset: Subset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    All,
    Gradient,
    BusemannLimit,
    Logreg,
    Density,
    InferenceEquiv,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long, value_enum, default_value_t = SuiteArg::All)]
    pub suite: SuiteArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Negates the analytic gradient (negative control for the gradient suite).
    #[arg(long, hide = true)]
    pub corrupt_gradient: bool,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: DataSpec,
    /// Output file; the extension (.csv or .svg) selects the format.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub protos: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Subset::All)]
    pub subset: Subset,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> CommandResult
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let exit_code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            return CommandResult { exit_code, report: e.render().to_string() };
        }
    };
    execute(&cli)
}

pub fn execute(cli: &Cli) -> CommandResult {
    let outcome = match &cli.command {
        Command::Place(a) => place(a).map(Report::Place),
        Command::Train(a) => train_cmd(a).map(|r| Report::Train(Box::new(r))),
        Command::Eval(a) => eval_cmd(a).map(|r| Report::Eval(Box::new(r))),
        Command::Check(a) => check(a).map(Report::Check),
        Command::Export(a) => export(a).map(Report::Export),
    };
    match outcome {
        Ok(report) => {
            let exit_code = if report.passed() { EXIT_OK } else { EXIT_VALIDATION };
            let text = if cli.json { report.to_json() } else { report.to_text() };
            CommandResult { exit_code, report: text }
        }
        Err(e) => {
            let text = if cli.json {
                serde_json::json!({ "error": e.to_string(), "exit_code": e.exit_code() }).to_string()
            } else {
                format!("error: {e}\n")
            };
            CommandResult { exit_code: e.exit_code(), report: text }
        }
    }
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum Report {
    Place(PlaceReport),
    Train(Box<TrainReport>),
    Eval(Box<EvalOutput>),
    Check(Vec<SuiteReport>),
    Export(ExportReport),
}

impl Report {
    fn passed(&self) -> bool {
        match self {
            Report::Check(reports) => reports.iter().all(|r| r.passed),
            _ => true,
        }
    }

    fn to_json(&self) -> String {
        let mut s = match self {
            Report::Check(reports) => {
                serde_json::to_string_pretty(&CheckJson { passed: self.passed(), suites: reports })
            }
            other => serde_json::to_string_pretty(other),
        }
        .expect("reports contain only serializable values");
        s.push('\n');
        s
    }

    fn to_text(&self) -> String {
        let mut out = String::new();
        match self {
            Report::Place(r) => {
                let _ = writeln!(out, "wrote {} prototypes (d={}, {}) to {}", r.classes, r.dims, r.method, r.out);
                let _ = writeln!(
                    out,
                    "min angle {:.6} rad ({:.3} deg), max cosine {:.6}",
                    r.metrics.min_angle,
                    r.metrics.min_angle.to_degrees(),
                    r.metrics.max_cosine
                );
            }
            Report::Train(r) => {
                let _ = writeln!(
                    out,
                    "trained {} epochs on {} examples ({} validation), phi = {}",
                    r.epochs, r.train_examples, r.validation_examples, r.phi
                );
                if let Some(loss) = r.final_loss {
                    let _ = writeln!(out, "final training loss {loss:.6}");
                }
                let _ = writeln!(out, "final validation accuracy {:.4}", r.validation.accuracy);
                let _ = writeln!(out, "checkpoint {}", r.checkpoint);
                let _ = writeln!(out, "metrics {}", r.metrics);
            }
            Report::Eval(r) => {
                let e = &r.report;
                let _ = writeln!(out, "{} examples ({} subset)", e.examples, r.subset);
                let _ = writeln!(out, "accuracy {:.4}", e.accuracy);
                for (class, acc) in e.per_class_accuracy.iter().enumerate() {
                    match acc {
                        Some(a) => {
                            let _ = writeln!(out, "  class {class}: {a:.4}");
                        }
                        None => {
                            let _ = writeln!(out, "  class {class}: no examples");
                        }
                    }
                }
                let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"));
                let _ = writeln!(out, "mean origin distance, correct   {}", opt(e.mean_distance_correct));
                let _ = writeln!(out, "mean origin distance, incorrect {}", opt(e.mean_distance_incorrect));
                let _ = writeln!(out, "distance gap {}", opt(e.distance_gap));
                let _ = writeln!(out, "spearman(distance, correct) {}", opt(e.spearman));
                if e.degenerate > 0 {
                    let _ = writeln!(out, "{} embeddings at the origin", e.degenerate);
                }
            }
            Report::Check(reports) => {
                for r in reports {
                    let _ = writeln!(
                        out,
                        "[{}] {}: {} cases, max deviation {:.3e}, {:.3}s",
                        if r.passed { "PASS" } else { "FAIL" },
                        r.suite,
                        r.cases,
                        r.max_deviation,
                        r.elapsed_seconds
                    );
                    for d in &r.details {
                        let _ = writeln!(out, "    {d}");
                    }
                    for f in r.failures.iter().take(5) {
                        let _ = writeln!(out, "    failing case (deviation {:.3e}): {}", f.deviation, f.inputs);
                    }
                    if r.failures.len() > 5 {
                        let _ = writeln!(out, "    ... {} more", r.failures.len() - 5);
                    }
                }
            }
            Report::Export(r) => {
                let _ = writeln!(out, "wrote {} rows ({}) to {}", r.rows, r.format, r.out);
            }
        }
        out
    }
}

#[derive(Serialize)]
struct CheckJson<'a> {
    passed: bool,
    suites: &'a [SuiteReport],
}

#[derive(Debug, Serialize)]
struct PlaceReport {
    classes: usize,
    dims: usize,
    method: &'static str,
    out: String,
    metrics: SeparationMetrics,
}

fn place(a: &PlaceArgs) -> Result<PlaceReport, CliError> {
    if a.classes < 2 {
        return Err(CliError::Usage(format!("--classes must be >= 2, got {}", a.classes)));
    }
    let method = a.method.unwrap_or(if a.dims == 2 { Method::Uniform } else { Method::Separation });
    let set = match method {
        Method::Uniform if a.dims != 2 => {
            return Err(CliError::Usage(format!("uniform placement requires --dims 2, got {}", a.dims)))
        }
        Method::Separation if a.dims < 3 => {
            return Err(CliError::Usage(format!("separation placement requires --dims >= 3, got {}", a.dims)))
        }
        Method::Uniform => uniform_circle_prototypes(a.classes)?,
        Method::Separation => separation_prototypes(a.classes, a.dims, a.iters, a.lr, a.seed)?,
    };
    write_prototypes(&a.out, &set)?;
    Ok(PlaceReport {
        classes: a.classes,
        dims: a.dims,
        method: match method {
            Method::Uniform => "uniform-circle",
            Method::Separation => "separation",
        },
        out: a.out.display().to_string(),
        metrics: separation_metrics(&set),
    })
}

#[derive(Debug, Serialize)]
struct TrainReport {
    epochs: usize,
    train_examples: usize,
    validation_examples: usize,
    phi: f64,
    final_loss: Option<f64>,
    validation: EvalReport,
    checkpoint: String,
    metrics: String,
}

fn default_metrics_path(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.file_stem().map(|s| s.to_os_string()).unwrap_or_else(|| "checkpoint".into());
    name.push(".metrics.jsonl");
    checkpoint.with_file_name(name)
}

fn split_rows(data: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset), CliError> {
    let (tr, va) = split_indices(data, spec)?;
    Ok((data.subset(&tr, format!("{}:train", data.name()))?, data.subset(&va, format!("{}:val", data.name()))?))
}

fn train_cmd(a: &TrainArgs) -> Result<TrainReport, CliError> {
    let data = a.data.load()?;
    let protos = read_prototypes(&a.protos)?;
    let out_dim = a.out_dim.unwrap_or(protos.dimension());
    if out_dim != protos.dimension() {
        return Err(CliError::Validation(format!(
            "model output dimension {out_dim} does not match prototype dimension {} ({})",
            protos.dimension(),
            a.protos.display()
        )));
    }
    if data.class_count() > protos.len() {
        return Err(CliError::Validation(format!(
            "dataset has {} classes but {} holds only {} prototypes",
            data.class_count(),
            a.protos.display(),
            protos.len()
        )));
    }
    let split_spec = SplitSpec { validation_fraction: a.val_fraction, seed: a.split_seed, stratified: !a.no_stratify };
    let (mut tr, mut va) = split_rows(&data, &split_spec)?;
    let standardization = if a.standardize {
        let s = Standardizer::fit(&tr);
        tr = s.apply(&tr)?;
        va = s.apply(&va)?;
        Some(s)
    } else {
        None
    };

    let init = if a.hidden.is_empty() {
        Model::linear(data.input_dim(), out_dim, a.seed)?
    } else {
        Model::mlp(data.input_dim(), &a.hidden, out_dim, a.seed)?
    };
    let cfg = TrainConfig {
        learning_rate: a.lr,
        weight_decay: a.weight_decay,
        batch_size: a.batch_size,
        epochs: a.epochs,
        lr_decay_epochs: a.lr_decay_epochs.clone(),
        lr_decay_factor: a.lr_decay_factor,
        penalty_slope: a.slope,
        seed: a.seed,
        deterministic: !a.parallel,
    };
    let (model, history) = train(&init, &tr, Some(&va), &protos, &cfg)?;
    let validation = evaluate(&model, &va, &protos)?;

    let proto_ref = std::fs::canonicalize(&a.protos).unwrap_or_else(|_| a.protos.clone());
    let mut ckpt = Checkpoint::from_model(&model, &cfg, Some(proto_ref.display().to_string()));
    ckpt.standardization = standardization;
    ckpt.split = Some(split_spec);
    let final_loss = history.epoch_loss.last().copied();
    if let Some(loss) = final_loss.filter(|l| l.is_finite()) {
        ckpt.final_metrics.insert("train_loss".into(), loss);
    }
    ckpt.final_metrics.insert("val_accuracy".into(), validation.accuracy);
    ckpt.save(&a.checkpoint)?;
    let metrics = a.metrics.clone().unwrap_or_else(|| default_metrics_path(&a.checkpoint));
    write_metrics_jsonl(&metrics, &history)?;

    Ok(TrainReport {
        epochs: a.epochs,
        train_examples: tr.len(),
        validation_examples: va.len(),
        phi: ckpt.phi(),
        final_loss,
        validation,
        checkpoint: a.checkpoint.display().to_string(),
        metrics: metrics.display().to_string(),
    })
}

/// Checkpoint, prototypes and the selected rows, preprocessed as in training.
struct Loaded {
    model: Model,
    protos: PrototypeSet,
    data: Dataset,
}

fn load_for_inference(
    checkpoint: &Path,
    data: &DataSpec,
    protos: Option<&PathBuf>,
    subset: Subset,
) -> Result<Loaded, CliError> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let model = ckpt.to_model()?;
    let proto_path = match (protos, &ckpt.prototype_file_reference) {
        (Some(p), _) => p.clone(),
        (None, Some(r)) => PathBuf::from(r),
        (None, None) => {
            return Err(CliError::Usage("checkpoint has no prototype reference; pass --protos".into()));
        }
    };
    let protos = read_prototypes(&proto_path)?;
    let mut data = data.load()?;
    if subset != Subset::All {
        let spec = ckpt.split.ok_or_else(|| CliError::Usage("checkpoint records no split; use --subset all".into()))?;
        let (tr, va) = split_rows(&data, &spec)?;
        data = if subset == Subset::Train { tr } else { va };
    }
    if let Some(s) = &ckpt.standardization {
        data = s.apply(&data)?;
    }
    Ok(Loaded { model, protos, data })
}

#[derive(Debug, Serialize)]
struct EvalOutput {
    subset: &'static str,
    #[serde(flatten)]
    report: EvalReport,
}

fn subset_name(s: Subset) -> &'static str {
    match s {
        Subset::All => "all",
        Subset::Train => "train",
        Subset::Validation => "validation",
    }
}

fn eval_cmd(a: &EvalArgs) -> Result<EvalOutput, CliError> {
    let l = load_for_inference(&a.checkpoint, &a.data, a.protos.as_ref(), a.subset)?;
    Ok(EvalOutput { subset: subset_name(a.subset), report: evaluate(&l.model, &l.data, &l.protos)? })
}

fn negated_gradient(x: &EuclideanVector, p: &IdealPoint, phi: f64) -> busemann_core::Result<LossGradient> {
    let mut g = loss_gradient(x, p, phi)?;
    g.grad.iter_mut().for_each(|v| *v = -*v);
    Ok(g)
}

fn check(a: &CheckArgs) -> Result<Vec<SuiteReport>, CliError> {
    let suites: Vec<Suite> = match a.suite {
        SuiteArg::All => Suite::ALL.to_vec(),
        SuiteArg::Gradient => vec![Suite::Gradient],
        SuiteArg::BusemannLimit => vec![Suite::BusemannLimit],
        SuiteArg::Logreg => vec![Suite::Logreg],
        SuiteArg::Density => vec![Suite::Density],
        SuiteArg::InferenceEquiv => vec![Suite::InferenceEquiv],
    };
    suites
        .into_iter()
        .map(|s| match s {
            Suite::Gradient if a.corrupt_gradient => verify::gradient_suite(a.seed, negated_gradient),
            _ => s.run(a.seed),
        })
        .collect::<busemann_core::Result<Vec<_>>>()
        .map_err(CliError::from)
}

#[derive(Debug, Serialize)]
struct ExportReport {
    rows: usize,
    format: &'static str,
    out: String,
}

fn export(a: &ExportArgs) -> Result<ExportReport, CliError> {
    let format = match a.out.extension().and_then(|e| e.to_str()) {
        Some("csv") => "csv",
        Some("svg") => "svg",
        _ => return Err(CliError::Usage(format!("{}: output must end in .csv or .svg", a.out.display()))),
    };
    let l = load_for_inference(&a.checkpoint, &a.data, a.protos.as_ref(), a.subset)?;
    if format == "svg" && l.model.output_dim() != 2 {
        return Err(CliError::Usage(format!(
            "SVG export needs a 2-dimensional embedding, checkpoint has d = {}",
            l.model.output_dim()
        )));
    }
    let examples = embed_dataset(&l.model, &l.data, &l.protos)?;
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", a.out.display()));
    if format == "svg" {
        std::fs::write(&a.out, svg::render(&examples, &l.protos)).map_err(io)?;
    } else {
        let csv_err = |e: csv::Error| CliError::Io(format!("{}: {e}", a.out.display()));
        let mut w = csv::Writer::from_path(&a.out).map_err(csv_err)?;
        let d = l.model.output_dim();
        let mut header: Vec<String> = (1..=d).map(|k| format!("z_{k}")).collect();
        header.extend(["label", "predicted", "origin_distance"].map(String::from));
        w.write_record(&header).map_err(csv_err)?;
        for ex in &examples {
            let mut row: Vec<String> = ex.embedding.coords().iter().map(|&c| format_f64(c)).collect();
            row.push(ex.label.to_string());
            row.push(ex.prediction.class.to_string());
            row.push(format_f64(ex.prediction.confidence));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(io)?;
    }
    Ok(ExportReport { rows: examples.len(), format, out: a.out.display().to_string() })
}
