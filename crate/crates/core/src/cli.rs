//! `bagprop` command line.
//!
//! Exit codes: 0 success, 1 data or validation error, 2 usage error.
//! Diagnostics go to stderr; machine-readable output goes to `--out` or
//! stdout.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::{self, Coverage, Dataset, GroupSelector};
use crate::error::{Error, Result};
use crate::inference::{self, NeutralBand, NeutralPolicy};
use crate::scalar::Scalar;
use crate::similarity::{build_graph, Scope, SimilarityConfig, SimilarityGraph};
use crate::synth::{self, Composition, GroupSize, ScoreMode, SynthConfig};
use crate::trainer::{self, GraphMode, Hyperparams, LambdaScope};

#[derive(Debug, Parser)]
#[command(
    name = "bagprop",
    version,
    about = "Transfer group scores to the instances inside each group"
)]
struct Cli {
    /// Print progress and summaries to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model from instances and scored groups.
    Train(TrainArgs),
    /// Score instances and write one prediction per line.
    Predict(PredictArgs),
    /// Precision/recall of instance predictions against ground-truth labels.
    EvalInstances(EvalInstancesArgs),
    /// Accuracy of the averaged-score group classifier on binary groups.
    EvalGroups(EvalGroupsArgs),
    /// Per-instance scores within one group, most positive first.
    Attribute(AttributeArgs),
    /// Find the neutral band width that yields a target recall.
    Calibrate(CalibrateArgs),
    /// Generate a synthetic dataset with known instance labels.
    Synth(SynthArgs),
    /// Compare analytic gradients with finite differences on random problems.
    Gradcheck(GradcheckArgs),
    /// Summary counts for a dataset.
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Precision {
    F64,
    F32,
}

#[derive(Debug, Args)]
struct Common {
    /// Floating-point precision for all numerical work.
    #[arg(long, value_enum, default_value = "f64")]
    precision: Precision,
    /// Worker threads for graph building and scoring.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Instances file (JSON lines).
    #[arg(long)]
    instances: PathBuf,
    /// Groups file (JSON lines).
    #[arg(long)]
    groups: PathBuf,
    /// Expected feature dimension; inferred from the first record when absent.
    #[arg(long)]
    dim: Option<usize>,
    /// Keep only groups carrying this tag (and the instances they reference).
    #[arg(long)]
    filter_tag: Option<String>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Where to write the trained model.
    #[arg(long)]
    model: PathBuf,
    /// Trade-off alpha in lambda = alpha * |I|^2 / |G|.
    #[arg(long, default_value_t = 0.04)]
    alpha: f64,
    /// SGD learning rate.
    #[arg(long, default_value_t = 0.0001)]
    lr: f64,
    /// Groups per mini-batch.
    #[arg(long, default_value_t = 50)]
    batch_groups: usize,
    /// SGD steps per mini-batch.
    #[arg(long, default_value_t = 7)]
    inner_iters: usize,
    #[arg(long, default_value_t = 3)]
    epochs: usize,
    /// Cap on total SGD steps; 0 disables the cap.
    #[arg(long, default_value_t = 1050)]
    max_iters: usize,
    /// RBF bandwidth: w = exp(-gamma * |xi - xj|^2).
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Learn a bias term.
    #[arg(long)]
    bias: bool,
    /// Instance and group counts used for lambda.
    #[arg(long, value_enum, default_value = "batch")]
    lambda_scope: LambdaScopeArg,
    /// Use a global k-nearest-neighbour graph instead of dense per-batch graphs.
    #[arg(long, conflicts_with = "edgeless")]
    knn: Option<usize>,
    /// Drop the similarity term entirely.
    #[arg(long)]
    edgeless: bool,
    /// Cache file for the global kNN graph; reused when the dataset is unchanged.
    #[arg(long, requires = "knn")]
    graph_cache: Option<PathBuf>,
    /// Accept instances that belong to no group.
    #[arg(long)]
    allow_uncovered: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LambdaScopeArg {
    Batch,
    Global,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    instances: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Neutral band half-width b.
    #[arg(long, default_value_t = NeutralBand::DEFAULT_WIDTH)]
    band: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolicyArg {
    IgnoreNeutral,
    NoNeutralBand,
}

#[derive(Debug, Args)]
struct EvalInstancesArgs {
    /// Instances file; every record needs a "label".
    #[arg(long)]
    instances: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = NeutralBand::DEFAULT_WIDTH)]
    band: f64,
    #[arg(long, value_enum, default_value = "ignore-neutral")]
    policy: PolicyArg,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct EvalGroupsArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct AttributeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    model: PathBuf,
    /// Group to report on.
    #[arg(long)]
    group: String,
    #[arg(long, default_value_t = NeutralBand::DEFAULT_WIDTH)]
    band: f64,
    /// Emit JSON instead of a table.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[arg(long)]
    instances: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Fraction of instances that must stay outside the band.
    #[arg(long, default_value_t = 0.762)]
    target_recall: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CompositionArg {
    Uniform,
    Fixed,
    Bernoulli,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScoreModeArg {
    Proportion,
    Binary,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Directory receiving instances.jsonl and groups.jsonl.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 200)]
    n_groups: usize,
    /// Group size, or the minimum size when --group-size-max is given.
    #[arg(long, default_value_t = 10)]
    group_size: usize,
    #[arg(long)]
    group_size_max: Option<usize>,
    /// Positive class mean, comma separated; defaults to (2, 0, ..., 0).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pos_mean: Option<Vec<f64>>,
    /// Negative class mean, comma separated; defaults to (-2, 0, ..., 0).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    neg_mean: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    #[arg(long, value_enum, default_value = "uniform")]
    composition: CompositionArg,
    /// Positive fraction for fixed or bernoulli composition.
    #[arg(long, default_value_t = 0.5)]
    fraction: f64,
    #[arg(long, value_enum, default_value = "proportion")]
    score_mode: ScoreModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-6)]
    step: f64,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[command(flatten)]
    data: DataArgs,
}

/// Parses `argv` (program name first) and runs the command against the
/// process's stdout and stderr.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run`] with explicit output streams.
pub fn run_with<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                2
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    let mut ctx = Ctx {
        out,
        err,
        verbose: cli.verbose,
    };
    match dispatch(cli.command, &mut ctx) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(ctx.err, "error: {e}");
            1
        }
    }
}

struct Ctx<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    verbose: bool,
}

impl Ctx<'_> {
    fn note(&mut self, msg: impl std::fmt::Display) {
        if self.verbose {
            let _ = writeln!(self.err, "{msg}");
        }
    }

    fn warn(&mut self, msg: impl std::fmt::Display) {
        let _ = writeln!(self.err, "warning: {msg}");
    }

    /// Writes `body` to `path`, or to the output stream when `path` is `None`.
    fn emit(
        &mut self,
        path: Option<&Path>,
        body: impl FnOnce(&mut dyn Write) -> Result<()>,
    ) -> Result<()> {
        match path {
            Some(p) => {
                let file = File::create(p).map_err(|e| Error::io(p, e))?;
                let mut w = BufWriter::new(file);
                body(&mut w)?;
                w.flush().map_err(|e| Error::io(p, e))
            }
            None => {
                body(&mut *self.out)?;
                self.out.flush().map_err(|e| Error::io("<stdout>", e))
            }
        }
    }
}

fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(pool.install(f))
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<output>", e)
}

fn dispatch(command: Command, ctx: &mut Ctx<'_>) -> Result<i32> {
    match command {
        Command::Train(a) => match a.common.precision {
            Precision::F64 => train_cmd::<f64>(&a, ctx),
            Precision::F32 => train_cmd::<f32>(&a, ctx),
        },
        Command::Predict(a) => match a.common.precision {
            Precision::F64 => predict_cmd::<f64>(&a, ctx),
            Precision::F32 => predict_cmd::<f32>(&a, ctx),
        },
        Command::EvalInstances(a) => match a.common.precision {
            Precision::F64 => eval_instances_cmd::<f64>(&a, ctx),
            Precision::F32 => eval_instances_cmd::<f32>(&a, ctx),
        },
        Command::EvalGroups(a) => match a.common.precision {
            Precision::F64 => eval_groups_cmd::<f64>(&a, ctx),
            Precision::F32 => eval_groups_cmd::<f32>(&a, ctx),
        },
        Command::Attribute(a) => match a.common.precision {
            Precision::F64 => attribute_cmd::<f64>(&a, ctx),
            Precision::F32 => attribute_cmd::<f32>(&a, ctx),
        },
        Command::Calibrate(a) => match a.common.precision {
            Precision::F64 => calibrate_cmd::<f64>(&a, ctx),
            Precision::F32 => calibrate_cmd::<f32>(&a, ctx),
        },
        Command::Synth(a) => synth_cmd(&a, ctx),
        Command::Gradcheck(a) => gradcheck_cmd(&a, ctx),
        Command::Stats(a) => stats_cmd(&a, ctx),
    }
}

fn load_data<T: Scalar>(
    args: &DataArgs,
    coverage: Coverage,
    ctx: &mut Ctx<'_>,
) -> Result<Dataset<T>> {
    let validated = Dataset::<T>::load(&args.instances, &args.groups, args.dim, coverage)?;
    if !validated.warnings.is_empty() {
        ctx.warn(format!(
            "{} instance(s) belong to no group, e.g. {}",
            validated.warnings.len(),
            validated.warnings[0]
        ));
    }
    let data = validated.dataset;
    match &args.filter_tag {
        Some(tag) => data.filter_groups(&GroupSelector::Tag(tag.clone())),
        None => Ok(data),
    }
}

fn band(b: f64) -> Result<NeutralBand> {
    NeutralBand::new(b)
}

fn train_cmd<T: Scalar>(a: &TrainArgs, ctx: &mut Ctx<'_>) -> Result<i32> {
    let coverage = if a.allow_uncovered {
        Coverage::Lenient
    } else {
        Coverage::Strict
    };
    let data = load_data::<T>(&a.data, coverage, ctx)?;
    let graph = match (a.knn, a.edgeless) {
        (Some(k), _) => GraphMode::Knn { k },
        (None, true) => GraphMode::Edgeless,
        (None, false) => GraphMode::Batch,
    };
    let hp = Hyperparams {
        alpha_tradeoff: a.alpha,
        learning_rate: a.lr,
        batch_groups: a.batch_groups,
        inner_iters: a.inner_iters,
        epochs: a.epochs,
        max_total_iters: (a.max_iters > 0).then_some(a.max_iters),
        gamma: a.gamma,
        use_bias: a.bias,
        lambda_scope: match a.lambda_scope {
            LambdaScopeArg::Batch => LambdaScope::Batch,
            LambdaScopeArg::Global => LambdaScope::Global,
        },
        graph,
        seed: a.seed,
    };
    hp.check()?;
    let stats = data.stats();
    ctx.note(format!(
        "training on {} instances in {} groups (d = {}), {} steps",
        stats.n_instances,
        stats.n_groups,
        stats.dim,
        hp.total_iterations(stats.n_groups)
    ));
    let verbose = ctx.verbose;
    let (model, log) = with_threads(a.common.threads, || -> Result<_> {
        let global = match (graph, &a.graph_cache) {
            (GraphMode::Knn { k }, cache) => {
                let cfg = SimilarityConfig {
                    gamma: a.gamma,
                    knn: Some(k),
                };
                Some(knn_graph(&data, &cfg, cache.as_deref())?)
            }
            _ => None,
        };
        let mut log = Vec::new();
        let model = trainer::train_observed(&data, &hp, global.as_ref(), |r| {
            if verbose {
                log.push(format!(
                    "epoch {} batch {}: |I|={} |G|={} lambda={} objective {:.6e} -> {:.6e}",
                    r.epoch,
                    r.batch,
                    r.n_instances,
                    r.n_groups,
                    r.lambda,
                    r.objective_before,
                    r.objective_after
                ));
            }
        })?;
        Ok((model, log))
    })??;
    for line in log {
        ctx.note(line);
    }
    trainer::save_model(&model, &a.model)?;
    ctx.note(format!(
        "wrote {} after {} steps (final batch objective {:.6e}, {:.2}s)",
        a.model.display(),
        model.summary.iterations,
        model.summary.final_objective,
        model.summary.wall_time_secs
    ));
    Ok(0)
}

fn knn_graph<T: Scalar>(
    data: &Dataset<T>,
    cfg: &SimilarityConfig,
    cache: Option<&Path>,
) -> Result<SimilarityGraph<T>> {
    if let Some(path) = cache {
        if path.exists() {
            return SimilarityGraph::load_cache(path, data, cfg);
        }
    }
    let graph = build_graph(data, cfg, Scope::Full)?;
    if let Some(path) = cache {
        graph.save_cache(path, data, cfg)?;
    }
    Ok(graph)
}

fn predict_cmd<T: Scalar>(a: &PredictArgs, ctx: &mut Ctx<'_>) -> Result<i32> {
    let model = trainer::load_model::<T>(&a.model)?;
    let instances = dataset::load_instances::<T>(&a.instances, Some(model.dim))?;
    let band = band(a.band)?;
    let preds = with_threads(a.common.threads, || {
        inference::predict(&model, &instances, band)
    })??;
    ctx.emit(a.out.as_deref(), |w| {
        for p in &preds {
            serde_json::to_writer(&mut *w, p)?;
            w.write_all(b"\n").map_err(io_err)?;
        }
        Ok(())
    })?;
    Ok(0)
}

fn write_json<S: serde::Serialize>(w: &mut dyn Write, value: &S) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    w.write_all(b"\n").map_err(io_err)
}

fn eval_instances_cmd<T: Scalar>(a: &EvalInstancesArgs, ctx: &mut Ctx<'_>) -> Result<i32> {
    let model = trainer::load_model::<T>(&a.model)?;
    let instances = dataset::load_instances::<T>(&a.instances, Some(model.dim))?;
    let truths = inference::truth_labels(&instances)?;
    let preds = with_threads(a.common.threads, || {
        inference::predict(&model, &instances, band(a.band)?)
    })??;
    let policy = match a.policy {
        PolicyArg::IgnoreNeutral => NeutralPolicy::IgnoreNeutral,
        PolicyArg::NoNeutralBand => NeutralPolicy::NoNeutralBand,
    };
    let report = inference::evaluate_instances(&preds, &truths, policy)?;
    ctx.emit(a.out.as_deref(), |w| write_json(w, &report))?;
    Ok(0)
}

fn eval_groups_cmd<T: Scalar>(a: &EvalGroupsArgs, ctx: &mut Ctx<'_>) -> Result<i32> {
    let model = trainer::load_model::<T>(&a.model)?;
    let data = load_data::<T>(&a.data, Coverage::Lenient, ctx)?;
    let report = with_threads(a.common.threads, || {
        inference::evaluate_groups(&model, &data)
    })??;
    ctx.emit(a.out.as_deref(), |w| write_json(w, &report))?;
    Ok(0)
}

fn attribute_cmd<T: Scalar>(a: &AttributeArgs, ctx: &mut Ctx<'_>) -> Result<i32> {
    let model = trainer::load_model::<T>(&a.model)?;
    let data = load_data::<T>(&a.data, Coverage::Lenient, ctx)?;
    let g = data
        .group_index(&a.group)
        .ok_or_else(|| Error::UnknownGroup(a.group.clone()))?;
    let report = inference::attribute(&model, &data.groups()[g], &data, band(a.band)?)?;
    if a.json {
        ctx.emit(None, |w| write_json(w, &report))?;
    } else {
        ctx.emit(None, |w| write!(w, "{report}").map_err(io_err))?;
    }
    Ok(0)
}

#[derive(serde::Serialize)]
struct Calibration {
    band: f64,
    target_recall: f64,
    recall: f64,
    n: usize,
}

fn calibrate_cmd<T: Scalar>(a: &CalibrateArgs, ctx: &mut Ctx<'_>) -> Result<i32> {
    let model = trainer::load_model::<T>(&a.model)?;
    let instances = dataset::load_instances::<T>(&a.instances, Some(model.dim))?;
    let scores: Vec<f64> = with_threads(a.common.threads, || {
        inference::score_instances(&model, &instances)
    })??
    .into_iter()
    .map(Scalar::as_f64)
    .collect();
    let band = inference::calibrate_band(&scores, a.target_recall)?;
    let out = Calibration {
        band: band.width(),
        target_recall: a.target_recall,
        recall: inference::recall_at(&scores, band),
        n: scores.len(),
    };
    ctx.emit(a.out.as_deref(), |w| write_json(w, &out))?;
    Ok(0)
}

fn synth_cmd(a: &SynthArgs, ctx: &mut Ctx<'_>) -> Result<i32> {
    let axis = |v: f64| {
        let mut m = vec![0.0; a.dim];
        if let Some(first) = m.first_mut() {
            *first = v;
        }
        m
    };
    let cfg = SynthConfig {
        dim: a.dim,
        n_groups: a.n_groups,
        group_size: match a.group_size_max {
            Some(max) => GroupSize::Range(a.group_size, max),
            None => GroupSize::Fixed(a.group_size),
        },
        positive_mean: a.pos_mean.clone().unwrap_or_else(|| axis(2.0)),
        negative_mean: a.neg_mean.clone().unwrap_or_else(|| axis(-2.0)),
        noise_std: a.noise,
        composition: match a.composition {
            CompositionArg::Uniform => Composition::Uniform,
            CompositionArg::Fixed => Composition::Fixed(a.fraction),
            CompositionArg::Bernoulli => Composition::BernoulliBag(a.fraction),
        },
        score_mode: match a.score_mode {
            ScoreModeArg::Proportion => ScoreMode::Proportion,
            ScoreModeArg::Binary => ScoreMode::BinaryMajority,
        },
        seed: a.seed,
    };
    let data: Dataset<f64> = synth::generate(&cfg)?;
    data.save_dir(&a.out_dir)?;
    ctx.note(format!(
        "wrote {} instances in {} groups to {}",
        data.instances().len(),
        data.groups().len(),
        a.out_dir.display()
    ));
    Ok(0)
}

fn gradcheck_cmd(a: &GradcheckArgs, ctx: &mut Ctx<'_>) -> Result<i32> {
    const TOLERANCE: f64 = 1e-5;
    let report = synth::gradient_check(a.seed, a.trials, a.step)?;
    let pass = report.max_relative_error < TOLERANCE;
    writeln!(
        ctx.out,
        "max relative error {:.3e} over {} trials ({})",
        report.max_relative_error,
        report.trials,
        if pass { "ok" } else { "FAILED" }
    )
    .map_err(io_err)?;
    Ok(if pass { 0 } else { 1 })
}

fn stats_cmd(a: &StatsArgs, ctx: &mut Ctx<'_>) -> Result<i32> {
    let data = load_data::<f64>(&a.data, Coverage::Lenient, ctx)?;
    ctx.emit(None, |w| write_json(w, &data.stats()))?;
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_with(
            std::iter::once("bagprop").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run_capture(&["frobnicate"]).0, 2);
        assert_eq!(run_capture(&["train"]).0, 2);
        assert_eq!(
            run_capture(&[
                "train",
                "--knn",
                "3",
                "--edgeless",
                "--instances",
                "a",
                "--groups",
                "b",
                "--model",
                "m"
            ])
            .0,
            2
        );
    }

    #[test]
    fn help_lists_defaults() {
        let (code, out, _) = run_capture(&["train", "--help"]);
        assert_eq!(code, 0);
        for (flag, default) in [
            ("--alpha", "0.04"),
            ("--lr", "0.0001"),
            ("--batch-groups", "50"),
            ("--inner-iters", "7"),
            ("--epochs", "3"),
            ("--max-iters", "1050"),
            ("--gamma", "1"),
            ("--seed", "0"),
            ("--threads", "1"),
        ] {
            let line = out
                .lines()
                .find(|l| l.trim_start().starts_with(flag))
                .unwrap_or_else(|| panic!("{flag} missing"));
            let block = out.split(line).nth(1).unwrap_or("");
            let described = line.contains(&format!("[default: {default}]"))
                || block
                    .lines()
                    .take(3)
                    .any(|l| l.contains(&format!("[default: {default}]")));
            assert!(described, "{flag} should default to {default}:\n{out}");
        }
        let (_, out, _) = run_capture(&["predict", "--help"]);
        assert!(out.contains("[default: 0.048]"));
        let (_, out, _) = run_capture(&["calibrate", "--help"]);
        assert!(out.contains("[default: 0.762]"));
    }

    #[test]
    fn missing_file_names_path() {
        let (code, _, err) = run_capture(&[
            "train",
            "--instances",
            "/nonexistent/i.jsonl",
            "--groups",
            "/nonexistent/g.jsonl",
            "--model",
            "/tmp/m.json",
        ]);
        assert_eq!(code, 1);
        assert!(err.contains("/nonexistent/i.jsonl"), "{err}");
    }

    #[test]
    fn gradcheck_succeeds() {
        let (code, out, _) = run_capture(&["gradcheck", "--seed", "3"]);
        assert_eq!(code, 0, "{out}");
        assert!(out.contains("max relative error"));
    }
}
