use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rayon::prelude::*;
use serde::Serialize;
use tcad_core::data::{AnomalyValues, Schema};
use tcad_core::eval::{self, AggregateReport, EvalReport};
use tcad_core::net::{Activation, Checkpoint};
use tcad_core::optim::Loss;
use tcad_core::synth::{AnomalyRatioPolicy, SamplingSpace};
use tcad_core::{rng, theory};

use crate::config::ExperimentConfig;
use crate::pipeline::{self, OracleMetrics, Prepared, RunResult, RunSummary};
use crate::report::{self, OutDir, Summary};
use crate::{CliError, Cli, Command, GlobalArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Width,
    Depth,
    Activation,
    Loss,
    WeightDecay,
    Ratio,
    Sampling,
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Theory { n, d, alpha, q, r, s } => {
            let rep = theory_report(*n, *d, *alpha, *q, *r, *s)?;
            println!("{rep}");
            Ok(())
        }
        Command::Synth { problem, density, rho, n, seed } => {
            let out = g.out.as_deref().ok_or_else(|| CliError::Usage("synth needs --out DIR".into()))?;
            let (csv, schema) = synth(problem.as_deref(), density.as_deref(), *rho, *n, *seed, out)?;
            println!("{}\n{}", csv.display(), schema.display());
            Ok(())
        }
        Command::Train => {
            let (cfg, out) = resolve(g)?;
            train(&cfg, Some(&out), g.jobs).map(|_| ())
        }
        Command::Eval { checkpoint } => {
            let (cfg, out) = resolve(g)?;
            evaluate_checkpoint(&cfg, checkpoint, Some(&out), g.jobs).map(|_| ())
        }
        Command::Convergence => {
            let (cfg, out) = resolve(g)?;
            convergence(&cfg, Some(&out), g.jobs).map(|_| ())
        }
        Command::Ablate { axis, values } => {
            let (cfg, out) = resolve(g)?;
            ablate(&cfg, *axis, values, Some(&out), g.jobs).map(|_| ())
        }
    }
}

/// Config from `--config` with command-line overrides applied.
fn resolve(g: &GlobalArgs) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let path = g.config.as_deref().ok_or_else(|| CliError::Usage("--config PATH is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seeds) = &g.seed_list {
        cfg.seeds = seeds.clone();
    }
    if let Some(out) = &g.out {
        cfg.output_dir = Some(out.clone());
    }
    cfg.validate()?;
    let out = cfg
        .output_dir
        .clone()
        .ok_or_else(|| CliError::Usage("no output directory: pass --out or set output_dir".into()))?;
    Ok((cfg, out))
}

/// Runs `f` over `items`, in parallel when `jobs > 1`, keeping input order.
fn run_parallel<T: Sync, R: Send>(
    items: &[T],
    jobs: usize,
    f: impl Fn(&T) -> Result<R, CliError> + Sync + Send,
) -> Result<Vec<R>, CliError> {
    if jobs <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    pool.install(|| items.par_iter().map(&f).collect())
}

fn run_seeds(
    cfg: &ExperimentConfig,
    prepared: &Prepared,
    n: Option<usize>,
    jobs: usize,
) -> Result<Vec<RunResult>, CliError> {
    run_parallel(&cfg.seeds, jobs, |&seed| {
        pipeline::run_once(cfg, prepared, seed, n).map_err(|e| e.context(format!("seed {seed}")))
    })
}

/// The config as embedded in reports: the training weight actually used
/// filled in, and the output location left out so that reports depend on
/// the experiment only.
fn resolved(cfg: &ExperimentConfig, prepared: &Prepared) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.train.s = prepared.s(cfg);
    c.output_dir = None;
    c
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleSummary {
    pub bayes_risk: f64,
    pub risk: Summary,
    pub excess_risk: Summary,
    pub level_set_error: Summary,
    pub generalization_error: Summary,
}

fn oracle_summary(metrics: &[&OracleMetrics]) -> Option<OracleSummary> {
    let first = metrics.first()?;
    let col = |f: fn(&OracleMetrics) -> f64| Summary::of(&metrics.iter().map(|m| f(m)).collect::<Vec<_>>());
    Some(OracleSummary {
        bayes_risk: first.bayes_risk,
        risk: col(|m| m.risk),
        excess_risk: col(|m| m.excess_risk),
        level_set_error: col(|m| m.level_set_error),
        generalization_error: col(|m| m.generalization_error),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Aggregate {
    pub eval: AggregateReport,
    pub sign_accuracy: Summary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSummary>,
}

fn aggregate(runs: &[RunSummary]) -> Result<Aggregate, CliError> {
    let evals: Vec<EvalReport> = runs.iter().map(|r| r.eval.clone()).collect();
    let oracle: Vec<&OracleMetrics> = runs.iter().filter_map(|r| r.oracle.as_ref()).collect();
    Ok(Aggregate {
        eval: eval::aggregate_runs(&evals)?,
        sign_accuracy: Summary::of(&runs.iter().map(|r| r.sign_accuracy).collect::<Vec<_>>()),
        oracle: oracle_summary(&oracle),
    })
}

fn archive_run(out: &OutDir, tag: &str, run: &RunResult) -> Result<(), CliError> {
    let hist = out.curve(&format!("history_{tag}.csv"));
    run.history.save_csv(&hist).map_err(|e| CliError::Runtime(format!("{}: {e}", hist.display())))?;
    report::write_curve(&out.curve(&format!("pr_{tag}.csv")), &run.pr_curve, ["threshold", "recall", "precision"])?;
    report::write_curve(&out.curve(&format!("roc_{tag}.csv")), &run.roc_curve, ["threshold", "fpr", "tpr"])?;
    let ck = out.checkpoint(&format!("{tag}.ckpt"));
    run.checkpoint().save(&ck).map_err(|e| CliError::Runtime(format!("{}: {e}", ck.display())))
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub command: &'static str,
    pub config: ExperimentConfig,
    /// Normal-class weight actually used for training.
    pub s: f64,
    pub runs: Vec<RunSummary>,
    pub aggregate: Aggregate,
}

pub fn train(cfg: &ExperimentConfig, out: Option<&Path>, jobs: usize) -> Result<TrainReport, CliError> {
    let prepared = pipeline::prepare(cfg)?;
    let results = run_seeds(cfg, &prepared, None, jobs)?;
    let runs: Vec<RunSummary> = results.iter().map(RunResult::summary).collect();
    let rep = TrainReport {
        command: "train",
        config: resolved(cfg, &prepared),
        s: prepared.s(cfg),
        aggregate: aggregate(&runs)?,
        runs,
    };
    if let Some(out) = out {
        let dir = OutDir::create(out)?;
        for r in &results {
            archive_run(&dir, &format!("seed{}", r.seed), r)?;
        }
        report::write_json(&dir.report(), &rep)?;
    }
    Ok(rep)
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalRun {
    pub seed: u64,
    pub eval: EvalReport,
    pub sign_accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleMetrics>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalCommandReport {
    pub command: &'static str,
    pub config: ExperimentConfig,
    pub checkpoint: String,
    pub runs: Vec<EvalRun>,
    pub aggregate: AggregateReport,
}

pub fn evaluate_checkpoint(
    cfg: &ExperimentConfig,
    checkpoint: &Path,
    out: Option<&Path>,
    jobs: usize,
) -> Result<EvalCommandReport, CliError> {
    let ck = Checkpoint::load(checkpoint)
        .map_err(|e| CliError::Usage(format!("checkpoint {}: {e}", checkpoint.display())))?;
    let network = ck.network()?;
    let threshold = ck
        .metadata
        .get("threshold")
        .and_then(|v| v.as_f64())
        .ok_or_else(|| CliError::Usage(format!("checkpoint {} carries no threshold", checkpoint.display())))?;
    let prepared = pipeline::prepare(cfg)?;
    if network.config.input_dim != prepared.dim() {
        return Err(CliError::Usage(format!(
            "checkpoint expects {} inputs but the data has {}",
            network.config.input_dim,
            prepared.dim()
        )));
    }
    let runs = run_parallel(&cfg.seeds, jobs, |&seed| {
        let (ev, sign_accuracy, _, _) = pipeline::evaluate(&prepared, &network, threshold, seed)?;
        let oracle = match &prepared {
            Prepared::Oracle { problem, .. } => Some(pipeline::oracle_metrics(problem, &network, seed)?),
            Prepared::Data { .. } => None,
        };
        Ok(EvalRun { seed, eval: ev, sign_accuracy, oracle })
    })?;
    let evals: Vec<EvalReport> = runs.iter().map(|r| r.eval.clone()).collect();
    let rep = EvalCommandReport {
        command: "eval",
        config: resolved(cfg, &prepared),
        checkpoint: checkpoint.display().to_string(),
        aggregate: eval::aggregate_runs(&evals)?,
        runs,
    };
    if let Some(out) = out {
        let dir = OutDir::create(out)?;
        report::write_json(&dir.report(), &rep)?;
    }
    Ok(rep)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub runs: usize,
    /// Accuracy of `sign(f)` on the test set.
    pub accuracy: Summary,
    pub aupr: Summary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excess_risk: Option<Summary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level_set_error: Option<Summary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub command: &'static str,
    pub config: ExperimentConfig,
    pub s: f64,
    pub rows: Vec<ConvergenceRow>,
    pub runs: Vec<RunSummary>,
}

impl ConvergenceReport {
    pub fn csv(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let oracle = self.rows.first().is_some_and(|r| r.excess_risk.is_some());
        let mut header = vec!["n", "accuracy_mean", "accuracy_std"];
        if oracle {
            header.extend([
                "excess_risk_mean",
                "excess_risk_std",
                "level_set_mean",
                "level_set_std",
                "excess_risk_median",
                "level_set_median",
            ]);
        }
        header.extend(["aupr_mean", "aupr_std", "runs"]);
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut v = vec![r.n.to_string(), r.accuracy.mean.to_string(), r.accuracy.std.to_string()];
                if let (Some(e), Some(s)) = (r.excess_risk, r.level_set_error) {
                    v.extend([e.mean, e.std, s.mean, s.std, e.median, s.median].map(|x| x.to_string()));
                }
                v.extend([r.aupr.mean.to_string(), r.aupr.std.to_string(), r.runs.to_string()]);
                v
            })
            .collect();
        (header.into_iter().map(String::from).collect(), rows)
    }
}

pub fn convergence(cfg: &ExperimentConfig, out: Option<&Path>, jobs: usize) -> Result<ConvergenceReport, CliError> {
    if cfg.n_grid.is_empty() {
        return Err(CliError::Usage("convergence needs a non-empty n_grid".into()));
    }
    let prepared = pipeline::prepare(cfg)?;
    let specs: Vec<(usize, u64)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| cfg.seeds.iter().map(move |&s| (n, s)))
        .collect();
    let results = run_parallel(&specs, jobs, |&(n, seed)| {
        pipeline::run_once(cfg, &prepared, seed, Some(n)).map_err(|e| e.context(format!("n = {n}, seed {seed}")))
    })?;
    let mut rows = Vec::new();
    for (k, &n) in cfg.n_grid.iter().enumerate() {
        let chunk = &results[k * cfg.seeds.len()..(k + 1) * cfg.seeds.len()];
        let col = |f: &dyn Fn(&RunResult) -> f64| Summary::of(&chunk.iter().map(f).collect::<Vec<_>>());
        let oracle = prepared.is_oracle();
        rows.push(ConvergenceRow {
            n,
            runs: chunk.len(),
            accuracy: col(&|r| r.sign_accuracy),
            aupr: col(&|r| r.eval.aupr),
            excess_risk: oracle.then(|| col(&|r| r.oracle.as_ref().map_or(f64::NAN, |o| o.excess_risk))),
            level_set_error: oracle.then(|| col(&|r| r.oracle.as_ref().map_or(f64::NAN, |o| o.level_set_error))),
        });
    }
    let rep = ConvergenceReport {
        command: "convergence",
        config: resolved(cfg, &prepared),
        s: prepared.s(cfg),
        rows,
        runs: results.iter().map(RunResult::summary).collect(),
    };
    if let Some(out) = out {
        let dir = OutDir::create(out)?;
        for (r, &(n, seed)) in results.iter().zip(&specs) {
            let hist = dir.curve(&format!("history_n{n}_seed{seed}.csv"));
            r.history.save_csv(&hist).map_err(|e| CliError::Runtime(format!("{}: {e}", hist.display())))?;
        }
        let (header, rows) = rep.csv();
        report::write_table(&dir.curve("convergence.csv"), &header, &rows)?;
        report::write_json(&dir.report(), &rep)?;
    }
    Ok(rep)
}

/// Apply one ablation value to a copy of the config.
pub fn apply_axis(cfg: &ExperimentConfig, axis: Axis, value: &str) -> Result<ExperimentConfig, CliError> {
    let bad = |what: &str| CliError::Usage(format!("invalid {what} value `{value}`"));
    let mut c = cfg.clone();
    match axis {
        Axis::Width => c.net.width = value.parse().map_err(|_| bad("width"))?,
        Axis::Depth => c.net.depth = value.parse().map_err(|_| bad("depth"))?,
        Axis::Activation => {
            c.net.activation = match value.split_once(':') {
                None if value == "relu" => Activation::Relu,
                None if value == "leaky_relu" => Activation::leaky(),
                Some(("leaky_relu", slope)) => Activation::LeakyRelu {
                    slope: slope.parse().map_err(|_| bad("activation"))?,
                },
                _ => return Err(bad("activation")),
            }
        }
        Axis::Loss => {
            c.train.loss = match value {
                "hinge" => Loss::Hinge,
                "logistic" => Loss::Logistic,
                _ => return Err(bad("loss")),
            }
        }
        Axis::WeightDecay => c.train.weight_decay = value.parse().map_err(|_| bad("weight_decay"))?,
        Axis::Ratio => {
            c.ratio = match value {
                "equal" => AnomalyRatioPolicy::Equal,
                "lower_bound" => AnomalyRatioPolicy::LowerBound,
                v => {
                    let k = v
                        .strip_prefix("multiple:")
                        .or_else(|| v.strip_suffix('x'))
                        .ok_or_else(|| bad("ratio"))?;
                    AnomalyRatioPolicy::Multiple { k: k.parse().map_err(|_| bad("ratio"))? }
                }
            }
        }
        Axis::Sampling => {
            c.sampling = match value {
                "support" => SamplingSpace::Support,
                "ambient" => SamplingSpace::Ambient,
                _ => return Err(bad("sampling")),
            }
        }
    }
    c.validate()?;
    Ok(c)
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub value: String,
    pub runs: Vec<RunSummary>,
    pub aupr: Summary,
    pub accuracy: Summary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excess_risk: Option<Summary>,
    /// `+` better or `-` worse than the baseline by more than its std.
    pub aupr_flag: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excess_risk_flag: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationReport {
    pub command: &'static str,
    pub config: ExperimentConfig,
    pub axis: Axis,
    pub rows: Vec<AblationRow>,
}

/// `+`/`-` when `value` differs from `base` by more than `base.std`;
/// `higher_is_better` picks the direction.
pub fn delta_flag(base: &Summary, value: &Summary, higher_is_better: bool) -> String {
    let delta = value.mean - base.mean;
    if delta.abs() <= base.std || delta == 0.0 {
        return String::new();
    }
    if (delta > 0.0) == higher_is_better { "+" } else { "-" }.to_owned()
}

pub fn ablate(
    cfg: &ExperimentConfig,
    axis: Axis,
    values: &[String],
    out: Option<&Path>,
    jobs: usize,
) -> Result<AblationReport, CliError> {
    if values.is_empty() {
        return Err(CliError::Usage("ablate needs at least one value".into()));
    }
    let variants = values
        .iter()
        .map(|v| apply_axis(cfg, axis, v))
        .collect::<Result<Vec<_>, _>>()?;
    let dir = out.map(OutDir::create).transpose()?;
    let mut rows: Vec<AblationRow> = Vec::new();
    for (value, variant) in values.iter().zip(&variants) {
        let prepared = pipeline::prepare(variant)?;
        let results = run_seeds(variant, &prepared, None, jobs).map_err(|e| e.context(value.clone()))?;
        if let Some(dir) = &dir {
            let tag: String = value.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
            for r in &results {
                let hist = dir.curve(&format!("history_{}_{tag}_seed{}.csv", axis_name(axis), r.seed));
                r.history.save_csv(&hist).map_err(|e| CliError::Runtime(format!("{}: {e}", hist.display())))?;
            }
        }
        let runs: Vec<RunSummary> = results.iter().map(RunResult::summary).collect();
        let aupr = Summary::of(&runs.iter().map(|r| r.eval.aupr).collect::<Vec<_>>());
        let accuracy = Summary::of(&runs.iter().map(|r| r.eval.accuracy).collect::<Vec<_>>());
        let excess_risk = prepared.is_oracle().then(|| {
            Summary::of(&runs.iter().filter_map(|r| r.oracle.as_ref().map(|o| o.excess_risk)).collect::<Vec<_>>())
        });
        let (aupr_flag, excess_risk_flag) = match rows.first() {
            None => (String::new(), excess_risk.map(|_| String::new())),
            Some(base) => (
                delta_flag(&base.aupr, &aupr, true),
                excess_risk.zip(base.excess_risk).map(|(v, b)| delta_flag(&b, &v, false)),
            ),
        };
        rows.push(AblationRow { value: value.clone(), runs, aupr, accuracy, excess_risk, aupr_flag, excess_risk_flag });
    }
    let base = pipeline::prepare(cfg)?;
    let rep = AblationReport { command: "ablate", config: resolved(cfg, &base), axis, rows };
    if let Some(dir) = &dir {
        let oracle = rep.rows[0].excess_risk.is_some();
        let mut header: Vec<String> = ["value", "aupr_mean", "aupr_std", "aupr_flag", "accuracy_mean", "accuracy_std"]
            .map(String::from)
            .to_vec();
        if oracle {
            header.extend(["excess_risk_mean", "excess_risk_std", "excess_risk_flag"].map(String::from));
        }
        let table: Vec<Vec<String>> = rep
            .rows
            .iter()
            .map(|r| {
                let mut v = vec![
                    r.value.clone(),
                    r.aupr.mean.to_string(),
                    r.aupr.std.to_string(),
                    r.aupr_flag.clone(),
                    r.accuracy.mean.to_string(),
                    r.accuracy.std.to_string(),
                ];
                if let Some(e) = r.excess_risk {
                    v.extend([e.mean.to_string(), e.std.to_string(), r.excess_risk_flag.clone().unwrap_or_default()]);
                }
                v
            })
            .collect();
        report::write_table(&dir.curve(&format!("ablation_{}.csv", axis_name(axis))), &header, &table)?;
        report::write_json(&dir.report(), &rep)?;
    }
    Ok(rep)
}

fn axis_name(axis: Axis) -> String {
    axis.to_possible_value().map(|v| v.get_name().replace('-', "_")).unwrap_or_default()
}

/// Pretty-printed sizing report.
pub fn theory_report(n: u64, d: u32, alpha: f64, q: f64, r: f64, s: f64) -> Result<String, CliError> {
    let rep = theory::sizing(n, d, alpha, q, r, s)?;
    serde_json::to_string_pretty(&rep).map_err(|e| CliError::Runtime(e.to_string()))
}

/// Labeled draws `X ~ s Q + (1 - s) μ`, `Y | X ~ Bernoulli(η(X))` written
/// as `samples.csv` with a matching `samples.schema.json`.
pub fn synth(
    problem: Option<&str>,
    density: Option<&Path>,
    rho: Option<f64>,
    n: usize,
    seed: u64,
    out: &Path,
) -> Result<(PathBuf, PathBuf), CliError> {
    if n == 0 {
        return Err(CliError::Usage("synth needs n >= 1".into()));
    }
    if problem.is_none() && density.is_none() {
        return Err(CliError::Usage("synth needs --problem or --density".into()));
    }
    let p = pipeline::oracle_problem(problem, density, rho, None)?;
    let xs = p.sample_marginal(n, rng::derive_seed(seed, 1))?;
    let ys = p.sample_labels(&xs, rng::derive_seed(seed, 2))?;

    let mut schema = Schema::unit_cube(p.dim());
    schema.label.anomaly_values = AnomalyValues::List(vec!["anomaly".into()]);
    std::fs::create_dir_all(out).map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;
    let csv_path = out.join("samples.csv");
    let schema_path = out.join("samples.schema.json");

    let mut header: Vec<String> = schema.columns.iter().map(|c| c.name().to_owned()).collect();
    header.push(schema.label.name.clone());
    let rows: Vec<Vec<String>> = xs
        .iter_rows()
        .zip(&ys)
        .map(|(x, &y)| {
            let mut r: Vec<String> = x.iter().map(f64::to_string).collect();
            r.push(if y > 0.0 { "normal" } else { "anomaly" }.into());
            r
        })
        .collect();
    report::write_table(&csv_path, &header, &rows)?;
    schema
        .save(&schema_path)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", schema_path.display())))?;
    Ok((csv_path, schema_path))
}
