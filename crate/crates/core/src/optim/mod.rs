//! Weighted empirical risk minimization against synthetic anomalies.
//!
//! The objective over normals `T = {X_i}` (label +1) and synthetic anomalies
//! `T' = {X'_j}` (label -1) is
//!
//! ```text
//! (s/n) Σ ℓ(f(X_i)) + ((1-s)/n') Σ ℓ(-f(X'_j))
//! ```
//!
//! minimized with Adam and early stopping on a held-out split of both sets.

mod adam;
mod gradcheck;
mod loss;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{grad_check, GradCheckReport};
pub use loss::{hinge, hinge_deriv, logistic, logistic_deriv, Loss};

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::net::{self, Network, NetworkConfig, Parameters, Workspace};
use crate::{rng, sign, Error, Matrix, Result, Scorer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Weight of the normal class, in `[1/2, 1)`.
    pub s: f64,
    pub loss: Loss,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    /// Epochs without a validation improvement before stopping; a value at
    /// or above `max_epochs` disables early stopping.
    pub patience: usize,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            s: 0.5,
            loss: Loss::Hinge,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            weight_decay: 1e-4,
            max_epochs: 200,
            patience: 10,
            batch_size: None,
            val_fraction: 0.2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.s >= 0.5 && self.s < 1.0) {
            return bad(format!("s must lie in [1/2, 1), got {}", self.s));
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive".into());
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("{name} must lie in (0,1)"));
            }
        }
        if !(self.adam_eps > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("adam_eps must be > 0 and weight_decay >= 0".into());
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1".into());
        }
        if self.batch_size == Some(0) {
            return bad("batch_size must be positive".into());
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad("val_fraction must lie in (0,1)".into());
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
            weight_decay: self.weight_decay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_risk: Vec<f64>,
    pub val_risk: Vec<f64>,
    pub initial_train_risk: f64,
    pub initial_val_risk: f64,
    pub epochs: usize,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
    /// True when early stopping fired before `max_epochs`.
    pub converged: bool,
}

impl TrainHistory {
    pub fn best_val_risk(&self) -> f64 {
        self.val_risk[self.best_epoch - 1]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "train_risk", "val_risk"])?;
        for (i, (t, v)) in self.train_risk.iter().zip(&self.val_risk).enumerate() {
            w.write_record([(i + 1).to_string(), t.to_string(), v.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

fn check_sets(normals: &Matrix, synthetics: &Matrix) -> Result<()> {
    if normals.is_empty() {
        return Err(Error::Empty("normal sample set T".into()));
    }
    if synthetics.is_empty() {
        return Err(Error::Empty("synthetic sample set T'".into()));
    }
    if normals.cols() != synthetics.cols() {
        return Err(Error::DimensionMismatch {
            expected: normals.cols(),
            got: synthetics.cols(),
        });
    }
    Ok(())
}

/// `(s/n) Σ ℓ(f(X_i)) + ((1-s)/n') Σ ℓ(-f(X'_j))`.
pub fn empirical_risk<F: Scorer + ?Sized>(
    f: &F,
    normals: &Matrix,
    synthetics: &Matrix,
    s: f64,
    loss: Loss,
) -> Result<f64> {
    check_sets(normals, synthetics)?;
    let pos: f64 = normals.iter_rows().map(|x| loss.value(f.score(x))).sum();
    let neg: f64 = synthetics.iter_rows().map(|x| loss.value(-f.score(x))).sum();
    Ok(s * pos / normals.rows() as f64 + (1.0 - s) * neg / synthetics.rows() as f64)
}

/// The empirical risk with `sign(f)` in place of `f`, i.e. twice the
/// `s`-weighted misclassification rate.
pub fn zero_one_surrogate_risk<F: Scorer + ?Sized>(
    f: &F,
    normals: &Matrix,
    synthetics: &Matrix,
    s: f64,
) -> Result<f64> {
    empirical_risk(&|x: &[f64]| sign(f.score(x)), normals, synthetics, s, Loss::Hinge)
}

/// Everything `train_erm` produces, including the held-out splits so that
/// callers can calibrate thresholds on data the optimizer never saw.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: Network,
    pub history: TrainHistory,
    pub train_normals: Matrix,
    pub train_synthetics: Matrix,
    pub val_normals: Matrix,
    pub val_synthetics: Matrix,
}

/// Shuffles `0..n` and splits off a validation part of `round(frac · n)`
/// rows, keeping both parts non-empty. A single row serves as both.
fn holdout(n: usize, frac: f64, rng: &mut rng::Rng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    if n == 1 {
        return (idx.clone(), idx);
    }
    let n_val = ((frac * n as f64).round() as usize).clamp(1, n - 1);
    let val = idx.split_off(n - n_val);
    (idx, val)
}

#[derive(Clone, Copy)]
struct Point {
    normal: bool,
    row: usize,
}

/// Fits the network by Adam on the weighted empirical risk, with early stopping.
///
/// `val_fraction` of both `normals` and `synthetics` is held out; the
/// returned parameters are those with the lowest validation risk.
pub fn train_erm(
    normals: &Matrix,
    synthetics: &Matrix,
    net_config: &NetworkConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    check_sets(normals, synthetics)?;
    net_config.validate()?;
    cfg.validate()?;
    if normals.cols() != net_config.input_dim {
        return Err(Error::DimensionMismatch {
            expected: net_config.input_dim,
            got: normals.cols(),
        });
    }

    let mut split_rng = rng::seeded(rng::derive_seed(cfg.seed, 1));
    let (tr_n, va_n) = holdout(normals.rows(), cfg.val_fraction, &mut split_rng);
    let (tr_s, va_s) = holdout(synthetics.rows(), cfg.val_fraction, &mut split_rng);
    let train_normals = normals.select_rows(&tr_n);
    let train_synthetics = synthetics.select_rows(&tr_s);
    let val_normals = normals.select_rows(&va_n);
    let val_synthetics = synthetics.select_rows(&va_s);

    let mut params = net::init_params(net_config)?;
    let adam = cfg.adam();
    let mut state = AdamState::new(params.len());
    let mut ws = Workspace::new(net_config);

    let w_normal = cfg.s / train_normals.rows() as f64;
    let w_synth = (1.0 - cfg.s) / train_synthetics.rows() as f64;
    let mut points: Vec<Point> = (0..train_normals.rows())
        .map(|row| Point { normal: true, row })
        .chain((0..train_synthetics.rows()).map(|row| Point { normal: false, row }))
        .collect();
    let total = points.len();
    let batch = cfg.batch_size.unwrap_or(total).min(total);

    let risk = |p: &Parameters, pos: &Matrix, neg: &Matrix, ws: &mut Workspace| -> f64 {
        let mut sp = 0.0;
        for x in pos.iter_rows() {
            sp += cfg.loss.value(net::forward_with(p, net_config, x, ws));
        }
        let mut sn = 0.0;
        for x in neg.iter_rows() {
            sn += cfg.loss.value(-net::forward_with(p, net_config, x, ws));
        }
        cfg.s * sp / pos.rows() as f64 + (1.0 - cfg.s) * sn / neg.rows() as f64
    };

    let initial_train_risk = risk(&params, &train_normals, &train_synthetics, &mut ws);
    let initial_val_risk = risk(&params, &val_normals, &val_synthetics, &mut ws);
    if !initial_train_risk.is_finite() {
        return Err(Error::Divergence {
            epoch: 0,
            risk: initial_train_risk,
        });
    }

    let mut order_rng = rng::seeded(rng::derive_seed(cfg.seed, 2));
    let mut grad = Parameters::zeros(net_config);
    let mut best = params.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut train_hist = Vec::with_capacity(cfg.max_epochs);
    let mut val_hist = Vec::with_capacity(cfg.max_epochs);
    let mut converged = false;

    for epoch in 1..=cfg.max_epochs {
        if batch < total {
            points.shuffle(&mut order_rng);
        }
        for chunk in points.chunks(batch) {
            grad.values_mut().fill(0.0);
            // rescale so the mini-batch gradient is unbiased for the full objective
            let scale = total as f64 / chunk.len() as f64;
            for p in chunk {
                let (x, y, w) = if p.normal {
                    (train_normals.row(p.row), 1.0, w_normal)
                } else {
                    (train_synthetics.row(p.row), -1.0, w_synth)
                };
                net::accumulate_gradient(
                    &params, net_config, x, y, w * scale, cfg.loss, &mut grad, &mut ws,
                );
            }
            adam_step(&mut state, &mut params, &grad, &adam)?;
        }

        let tr = risk(&params, &train_normals, &train_synthetics, &mut ws);
        let va = risk(&params, &val_normals, &val_synthetics, &mut ws);
        // an overflowing parameter can leave a zero hinge risk behind, so
        // the parameters are checked as well as the risks
        if !tr.is_finite() || !va.is_finite() || !params.values().iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence {
                epoch,
                risk: if tr.is_finite() { va } else { tr },
            });
        }
        train_hist.push(tr);
        val_hist.push(va);
        if va < best_val {
            best_val = va;
            best_epoch = epoch;
            best.values_mut().copy_from_slice(params.values());
        } else if epoch - best_epoch > cfg.patience {
            converged = true;
            break;
        }
    }

    let epochs = train_hist.len();
    Ok(TrainOutcome {
        network: Network::new(net_config.clone(), best)?,
        history: TrainHistory {
            train_risk: train_hist,
            val_risk: val_hist,
            initial_train_risk,
            initial_val_risk,
            epochs,
            best_epoch,
            converged,
        },
        train_normals,
        train_synthetics,
        val_normals,
        val_synthetics,
    })
}
