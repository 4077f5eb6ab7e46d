//! One training run: data for a seed, synthetic anomalies, ERM, threshold
//! calibration and evaluation.

use serde::Serialize;
use tcad_core::data::{self, nslkdd, Dataset, Schema};
use tcad_core::eval::{self, CurvePoint, EvalReport};
use tcad_core::net::{Checkpoint, Network};
use tcad_core::optim::{train_erm, TrainConfig, TrainHistory};
use tcad_core::oracle::{named, Integration, OracleProblem, SyntheticDensity};
use tcad_core::{rng, synth, Matrix};

use rand::seq::SliceRandom;

use crate::config::{AttackFamily, ExperimentConfig, Source};
use crate::CliError;

// Sub-stream tags; one per independent source of randomness in a run.
const NORMALS: u64 = 10;
const SYNTHETIC: u64 = 20;
const INIT: u64 = 30;
const TRAINING: u64 = 40;
const TEST: u64 = 50;
const SUBSAMPLE: u64 = 60;
const SPLIT: u64 = 70;
const MONTE_CARLO: u64 = 80;

/// Data loaded once and shared by every run of an experiment.
pub enum Prepared {
    Oracle {
        problem: OracleProblem,
        n: usize,
        n_test: usize,
    },
    Data {
        schema: Schema,
        normals: Matrix,
        /// Held-out normals for the threshold; `None` uses the training
        /// loop's own validation normals.
        calibration: Option<Matrix>,
        test: Dataset,
    },
}

impl Prepared {
    pub fn dim(&self) -> usize {
        match self {
            Prepared::Oracle { problem, .. } => problem.dim(),
            Prepared::Data { schema, .. } => schema.encoded_dim(),
        }
    }

    pub fn is_oracle(&self) -> bool {
        matches!(self, Prepared::Oracle { .. })
    }

    /// The `s` training should use.
    pub fn s(&self, cfg: &ExperimentConfig) -> f64 {
        match self {
            Prepared::Oracle { problem, .. } => problem.s(),
            Prepared::Data { .. } => cfg.train.s,
        }
    }

    fn schema(&self) -> Schema {
        match self {
            Prepared::Oracle { problem, .. } => Schema::unit_cube(problem.dim()),
            Prepared::Data { schema, .. } => schema.clone(),
        }
    }
}

pub fn oracle_problem(
    problem: Option<&str>,
    density: Option<&std::path::Path>,
    rho: Option<f64>,
    s: Option<f64>,
) -> Result<OracleProblem, CliError> {
    let rho = match (rho, s) {
        (Some(r), _) => Some(r),
        (None, Some(s)) => {
            if !(s > 0.0 && s < 1.0) {
                return Err(CliError::Usage(format!("s must lie in (0,1), got {s}")));
            }
            Some((1.0 - s) / s)
        }
        (None, None) => None,
    };
    let p = match (problem, density) {
        (Some(name), _) => named::by_name(name, None)?,
        (None, Some(path)) => {
            let h = SyntheticDensity::load_json(path)
                .map_err(|e| CliError::Usage(format!("density {}: {e}", path.display())))?;
            OracleProblem::new(h, rho.unwrap_or(1.0))?
        }
        (None, None) => return Err(CliError::Usage("no oracle problem given".into())),
    };
    let p = match (rho, s) {
        (_, Some(s)) => OracleProblem::with_s(p.density().clone(), s)?,
        (Some(r), None) => OracleProblem::new(p.density().clone(), r)?,
        (None, None) => p,
    };
    Ok(p)
}

fn load_schema(path: &std::path::Path) -> Result<Schema, CliError> {
    Schema::load(path).map_err(|e| CliError::Usage(format!("schema {}: {e}", path.display())))
}

fn data_error(path: &std::path::Path, e: tcad_core::Error) -> CliError {
    CliError::from(e).context(path.display().to_string())
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, CliError> {
    cfg.validate()?;
    match &cfg.source {
        Source::Oracle { problem, density, rho, s, n, n_test } => Ok(Prepared::Oracle {
            problem: oracle_problem(problem.as_deref(), density.as_deref(), *rho, *s)?,
            n: *n,
            n_test: *n_test,
        }),
        Source::Csv { train, test, schema, split, .. } => {
            let schema = load_schema(schema)?;
            if !train.exists() {
                return Err(CliError::Usage(format!("training file {} not found", train.display())));
            }
            let table = data::load_csv(train, &schema).map_err(|e| data_error(train, e))?;
            let full = data::encode(&table, &schema, train.display().to_string())
                .map_err(|e| data_error(train, e))?;
            let (train_set, calibration, test_set) = match test {
                Some(test) => {
                    let t = data::load_csv(test, &schema).map_err(|e| data_error(test, e))?;
                    let test_set = data::encode(&t, &schema, format!("test:{}", test.display()))
                        .map_err(|e| data_error(test, e))?;
                    (full, None, test_set)
                }
                None => {
                    let (tr, va, te) = data::split(&full, *split, rng::derive_seed(cfg.seeds[0], SPLIT))?;
                    let cal = data::filter_unsupervised_train(&va)?;
                    (tr, Some(cal.features), te)
                }
            };
            let normals = data::filter_unsupervised_train(&train_set)?.features;
            Ok(Prepared::Data { schema, normals, calibration, test: test_set })
        }
        Source::NslKdd { train, test, attacks, .. } => {
            for p in [train, test] {
                if !p.exists() {
                    return Err(CliError::Usage(format!("NSL-KDD file {} not found", p.display())));
                }
            }
            let schema = nslkdd::fit_schema(train).map_err(|e| data_error(train, e))?;
            let tr = nslkdd::load(train, &schema).map_err(|e| data_error(train, e))?;
            let normals = data::encode(&tr.filter_labels(|l| l == "normal"), &schema, "train")?.features;
            let te = nslkdd::load(test, &schema).map_err(|e| data_error(test, e))?;
            let te = match attacks {
                AttackFamily::Dos => te.filter_labels(|l| l == "normal" || nslkdd::is_dos(l)),
                AttackFamily::All => te,
            };
            let test_set = data::encode(&te, &schema, "test")?;
            Ok(Prepared::Data { schema, normals, calibration: None, test: test_set })
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleMetrics {
    pub bayes_risk: f64,
    pub risk: f64,
    pub excess_risk: f64,
    pub level_set_error: f64,
    pub generalization_error: f64,
}

pub struct RunResult {
    pub seed: u64,
    pub n: usize,
    pub n_synthetic: usize,
    pub eval: EvalReport,
    /// Accuracy of `sign(f)` on the test set, without calibration.
    pub sign_accuracy: f64,
    pub oracle: Option<OracleMetrics>,
    pub history: TrainHistory,
    pub network: Network,
    pub pr_curve: Vec<CurvePoint>,
    pub roc_curve: Vec<CurvePoint>,
}

/// Per-run entry in a report; the heavy parts stay in their own files.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub n: usize,
    pub n_synthetic: usize,
    pub eval: EvalReport,
    pub sign_accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleMetrics>,
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_val_risk: f64,
    pub converged: bool,
}

impl RunResult {
    pub fn summary(&self) -> RunSummary {
        RunSummary {
            seed: self.seed,
            n: self.n,
            n_synthetic: self.n_synthetic,
            eval: self.eval.clone(),
            sign_accuracy: self.sign_accuracy,
            oracle: self.oracle.clone(),
            epochs: self.history.epochs,
            best_epoch: self.history.best_epoch,
            best_val_risk: self.history.best_val_risk(),
            converged: self.history.converged,
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(&self.network);
        ck.metadata.insert("threshold".into(), self.eval.threshold.into());
        ck.metadata.insert("seed".into(), self.seed.into());
        ck.metadata.insert("n".into(), self.n.into());
        ck
    }
}

fn integration_for(dim: usize, seed: u64) -> Integration {
    if dim <= 2 {
        Integration::Exact { tol: 1e-4 }
    } else {
        Integration::MonteCarlo { samples: 100_000, seed }
    }
}

pub fn oracle_metrics(problem: &OracleProblem, network: &Network, seed: u64) -> Result<OracleMetrics, CliError> {
    let mode = integration_for(problem.dim(), rng::derive_seed(seed, MONTE_CARLO));
    let bayes = problem.bayes_risk();
    let risk = problem.misclassification_risk(network, mode)?.value;
    Ok(OracleMetrics {
        bayes_risk: bayes,
        risk,
        excess_risk: risk - bayes,
        level_set_error: problem.level_set_error(network, mode)?.value,
        generalization_error: problem.generalization_error(network, mode)?.value,
    })
}

/// Labeled test set for this run.
pub fn test_set(prepared: &Prepared, seed: u64) -> Result<(Matrix, Vec<f64>), CliError> {
    match prepared {
        Prepared::Oracle { problem, n_test, .. } => Ok(problem.sample_labeled(*n_test, rng::derive_seed(seed, TEST))?),
        Prepared::Data { test, .. } => Ok((test.features.clone(), test.labels.clone())),
    }
}

/// Evaluate a trained network at `threshold` on the run's test set.
pub fn evaluate(
    prepared: &Prepared,
    network: &Network,
    threshold: f64,
    seed: u64,
) -> Result<(EvalReport, f64, Vec<CurvePoint>, Vec<CurvePoint>), CliError> {
    let (xs, ys) = test_set(prepared, seed)?;
    let scores = network.score_rows(&xs);
    let report = eval::evaluate(&scores, &ys, threshold)?;
    let sign_accuracy = eval::accuracy(&eval::predict(&scores, 0.0), &ys)?;
    Ok((report, sign_accuracy, eval::pr_curve(&scores, &ys)?, eval::roc_curve(&scores, &ys)?))
}

/// Train and evaluate for one seed; `n` overrides the number of normals.
pub fn run_once(cfg: &ExperimentConfig, prepared: &Prepared, seed: u64, n: Option<usize>) -> Result<RunResult, CliError> {
    let normals = match prepared {
        Prepared::Oracle { problem, n: default_n, .. } => {
            problem.sample_q(n.unwrap_or(*default_n), rng::derive_seed(seed, NORMALS))?
        }
        Prepared::Data { normals, .. } => match n {
            None => normals.clone(),
            Some(k) if k > normals.rows() => {
                return Err(CliError::Usage(format!(
                    "n = {k} exceeds the {} available training normals",
                    normals.rows()
                )))
            }
            Some(k) => {
                let mut idx: Vec<usize> = (0..normals.rows()).collect();
                idx.shuffle(&mut rng::seeded(rng::derive_seed(seed, SUBSAMPLE)));
                idx.truncate(k);
                idx.sort_unstable();
                normals.select_rows(&idx)
            }
        },
    };
    let s = prepared.s(cfg);
    let n_synthetic = synth::anomaly_count(normals.rows(), s, cfg.ratio)?;
    let synthetics = synth::sample(cfg.sampling, &prepared.schema(), n_synthetic, rng::derive_seed(seed, SYNTHETIC))?;

    let net_cfg = cfg.net.network_config(prepared.dim(), rng::derive_seed(seed, INIT))?;
    let train_cfg = TrainConfig {
        s,
        seed: rng::derive_seed(seed, TRAINING),
        ..cfg.train.clone()
    };
    let outcome = train_erm(&normals, &synthetics, &net_cfg, &train_cfg)?;
    let network = outcome.network;

    let calibration = match prepared {
        Prepared::Data { calibration: Some(c), .. } => c,
        _ => &outcome.val_normals,
    };
    let threshold = eval::calibrate_threshold(&network.score_rows(calibration), cfg.beta)?;
    let (eval_report, sign_accuracy, pr, roc) = evaluate(prepared, &network, threshold, seed)?;
    let oracle = match prepared {
        Prepared::Oracle { problem, .. } => Some(oracle_metrics(problem, &network, seed)?),
        Prepared::Data { .. } => None,
    };
    Ok(RunResult {
        seed,
        n: normals.rows(),
        n_synthetic,
        eval: eval_report,
        sign_accuracy,
        oracle,
        history: outcome.history,
        network,
        pr_curve: pr,
        roc_curve: roc,
    })
}
