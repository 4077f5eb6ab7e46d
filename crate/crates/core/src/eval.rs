//! Detection metrics with anomalies as the positive class.
//!
//! Scores follow the network orientation: higher means more normal, so a
//! sweep over thresholds walks scores in ascending order and flags
//! `score ≤ threshold` as anomalous. Labels are `+1` normal, `-1` anomaly.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub aupr: f64,
    pub auroc: f64,
    pub threshold: f64,
    /// Fraction of test normals flagged anomalous at `threshold`.
    pub fpr_at_threshold: f64,
    pub counts: Counts,
}

fn class_counts(labels: &[f64]) -> (usize, usize) {
    let anomalies = labels.iter().filter(|&&y| y < 0.0).count();
    (anomalies, labels.len() - anomalies)
}

fn check_pair(scores: &[f64], labels: &[f64]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    let (a, n) = class_counts(labels);
    if a == 0 || n == 0 {
        return Err(Error::InvalidConfig(
            "both normal and anomaly labels are required".into(),
        ));
    }
    Ok((a, n))
}

fn ascending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    idx
}

/// A (recall, precision) or (fpr, tpr) point per distinct score, ascending.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub x: f64,
    pub y: f64,
}

/// Cumulative `(threshold, tp, fp)` after each tie block.
fn sweep(scores: &[f64], labels: &[f64]) -> Vec<(f64, usize, usize)> {
    let order = ascending(scores);
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < order.len() {
        let v = scores[order[i]];
        while i < order.len() && scores[order[i]] == v {
            if labels[order[i]] < 0.0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push((v, tp, fp));
    }
    out
}

/// Average precision `Σ_k (R_k - R_{k-1}) P_k`, ties processed as one block.
pub fn aupr(scores: &[f64], labels: &[f64]) -> Result<f64> {
    let (pos, _) = check_pair(scores, labels)?;
    let mut ap = 0.0;
    let mut prev_tp = 0;
    for (_, tp, fp) in sweep(scores, labels) {
        if tp > prev_tp {
            let precision = tp as f64 / (tp + fp) as f64;
            ap += (tp - prev_tp) as f64 / pos as f64 * precision;
            prev_tp = tp;
        }
    }
    Ok(ap)
}

pub fn pr_curve(scores: &[f64], labels: &[f64]) -> Result<Vec<CurvePoint>> {
    let (pos, _) = check_pair(scores, labels)?;
    Ok(sweep(scores, labels)
        .into_iter()
        .map(|(t, tp, fp)| CurvePoint {
            threshold: t,
            x: tp as f64 / pos as f64,
            y: tp as f64 / (tp + fp) as f64,
        })
        .collect())
}

pub fn roc_curve(scores: &[f64], labels: &[f64]) -> Result<Vec<CurvePoint>> {
    let (pos, neg) = check_pair(scores, labels)?;
    Ok(sweep(scores, labels)
        .into_iter()
        .map(|(t, tp, fp)| CurvePoint {
            threshold: t,
            x: fp as f64 / neg as f64,
            y: tp as f64 / pos as f64,
        })
        .collect())
}

/// `P(anomaly score < normal score) + ½ P(tie)` via tied ranks.
pub fn auroc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    let (pos, neg) = check_pair(scores, labels)?;
    // blocks in ascending order: each normal in a block beats every anomaly
    // strictly below and ties with anomalies inside the block
    let mut wins = 0.0;
    let mut below_anom = 0usize;
    let mut prev_tp = 0;
    let mut prev_fp = 0;
    for (_, tp, fp) in sweep(scores, labels) {
        let block_anom = tp - prev_tp;
        let block_norm = fp - prev_fp;
        wins += block_norm as f64 * (below_anom as f64 + 0.5 * block_anom as f64);
        below_anom += block_anom;
        prev_tp = tp;
        prev_fp = fp;
    }
    Ok(wins / (pos as f64 * neg as f64))
}

/// Largest score `κ` with `#{score < κ} / m ≤ β`.
///
/// Classifying `score < κ` as anomalous then keeps the false-positive rate
/// on these normals at or below `β`.
pub fn calibrate_threshold(normal_scores: &[f64], beta: f64) -> Result<f64> {
    if normal_scores.is_empty() {
        return Err(Error::Empty("validation scores".into()));
    }
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidConfig(format!("beta must lie in [0,1), got {beta}")));
    }
    let mut sorted = normal_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let mut kappa = sorted[0];
    let mut below = 0;
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        if below as f64 / m > beta {
            break;
        }
        kappa = v;
        while i < sorted.len() && sorted[i] == v {
            i += 1;
        }
        below = i;
    }
    Ok(kappa)
}

/// `+1` (normal) when `score ≥ κ`, `-1` otherwise.
pub fn predict(scores: &[f64], threshold: f64) -> Vec<f64> {
    scores
        .iter()
        .map(|&s| if s < threshold { -1.0 } else { 1.0 })
        .collect()
}

pub fn accuracy(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: predictions.len(),
            got: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::Empty("labels".into()));
    }
    let hits = predictions.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / labels.len() as f64)
}

pub fn confusion(predictions: &[f64], labels: &[f64]) -> Counts {
    let mut c = Counts { tp: 0, fp: 0, tn: 0, fn_: 0 };
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p < 0.0, y < 0.0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    c
}

/// Full report at threshold `κ` on a labeled test set.
pub fn evaluate(scores: &[f64], labels: &[f64], threshold: f64) -> Result<EvalReport> {
    let preds = predict(scores, threshold);
    let counts = confusion(&preds, labels);
    let normals = counts.fp + counts.tn;
    Ok(EvalReport {
        accuracy: accuracy(&preds, labels)?,
        aupr: aupr(scores, labels)?,
        auroc: auroc(scores, labels)?,
        threshold,
        fpr_at_threshold: if normals == 0 { 0.0 } else { counts.fp as f64 / normals as f64 },
        counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self { mean, std }
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub runs: usize,
    pub accuracy: MeanStd,
    pub aupr: MeanStd,
    pub auroc: MeanStd,
    pub threshold: MeanStd,
    pub fpr_at_threshold: MeanStd,
}

pub fn aggregate_runs(reports: &[EvalReport]) -> Result<AggregateReport> {
    if reports.is_empty() {
        return Err(Error::Empty("reports".into()));
    }
    let col = |f: fn(&EvalReport) -> f64| MeanStd::of(&reports.iter().map(f).collect::<Vec<_>>());
    Ok(AggregateReport {
        runs: reports.len(),
        accuracy: col(|r| r.accuracy),
        aupr: col(|r| r.aupr),
        auroc: col(|r| r.auroc),
        threshold: col(|r| r.threshold),
        fpr_at_threshold: col(|r| r.fpr_at_threshold),
    })
}

pub fn write_curve_csv<W: Write>(points: &[CurvePoint], header: [&str; 3], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for p in points {
        w.write_record([p.threshold.to_string(), p.x.to_string(), p.y.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn aupr_examples() {
        let labels = [-1.0, -1.0, 1.0, 1.0];
        assert_eq!(aupr(&[0.1, 0.2, 0.3, 0.4], &labels).unwrap(), 1.0);
        let labels = [-1.0, 1.0, -1.0, 1.0];
        let v = aupr(&[0.1, 0.2, 0.3, 0.4], &labels).unwrap();
        assert!((v - 5.0 / 6.0).abs() < 1e-15);
        let labels = [-1.0, 1.0, 1.0, 1.0, -1.0];
        assert!((aupr(&[0.5; 5], &labels).unwrap() - 0.4).abs() < 1e-15);
        assert!(aupr(&[0.1, 0.2], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn auroc_examples() {
        let labels = [-1.0, -1.0, 1.0, 1.0];
        assert_eq!(auroc(&[0.1, 0.2, 0.3, 0.4], &labels).unwrap(), 1.0);
        assert_eq!(auroc(&[0.3; 4], &labels).unwrap(), 0.5);
        assert!(auroc(&[0.1], &[-1.0]).is_err());

        let mut r = rng::seeded(7);
        let n = 20_000;
        let scores: Vec<f64> = (0..n).map(|_| r.gen()).collect();
        let labels: Vec<f64> = (0..n).map(|_| if r.gen::<bool>() { 1.0 } else { -1.0 }).collect();
        // null AUROC has sd ≈ sqrt((n+1)/(12 n_a n_n)) ≈ 0.004
        assert!((auroc(&scores, &labels).unwrap() - 0.5).abs() < 0.02);
    }

    #[test]
    fn calibration_examples() {
        let s: Vec<f64> = (0..20).map(|i| i as f64 * 0.5 + 1.0).collect();
        assert_eq!(calibrate_threshold(&s, 0.0).unwrap(), 1.0);
        assert_eq!(calibrate_threshold(&s, 0.05).unwrap(), 1.5);
        let s: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(calibrate_threshold(&s, 0.5).unwrap(), 6.0);
        assert!(calibrate_threshold(&[], 0.1).is_err());
        assert!(calibrate_threshold(&s, 1.0).is_err());
        // ties: two copies of the smallest value
        assert_eq!(calibrate_threshold(&[1.0, 1.0, 2.0, 3.0], 0.25).unwrap(), 1.0);
        assert_eq!(calibrate_threshold(&[1.0, 1.0, 2.0, 3.0], 0.5).unwrap(), 2.0);
    }

    #[test]
    fn accuracy_and_aggregation() {
        let y = [1.0, -1.0, 1.0, -1.0];
        assert_eq!(accuracy(&y, &y).unwrap(), 1.0);
        let flipped: Vec<f64> = y.iter().map(|v| -v).collect();
        assert_eq!(accuracy(&flipped, &y).unwrap(), 0.0);
        assert_eq!(accuracy(&[1.0, -1.0, -1.0, 1.0], &y).unwrap(), 0.5);
        assert!(accuracy(&[], &[]).is_err());

        let ms = MeanStd::of(&[0.8, 0.9, 1.0]);
        assert!((ms.mean - 0.9).abs() < 1e-15 && (ms.std - 0.1).abs() < 1e-15);
        assert_eq!(MeanStd::of(&[0.7]), MeanStd { mean: 0.7, std: 0.0 });
        assert_eq!(MeanStd::of(&[0.3, 0.3]).std, 0.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn evaluate_report() {
        let scores = [0.1, 0.4, 0.5, 0.9, -0.2];
        let labels = [-1.0, 1.0, 1.0, 1.0, -1.0];
        let r = evaluate(&scores, &labels, 0.3).unwrap();
        assert_eq!(r.counts, Counts { tp: 2, fp: 0, tn: 3, fn_: 0 });
        assert_eq!(r.accuracy, 1.0);
        let c = r.counts;
        assert_eq!(c.tp + c.fp + c.tn + c.fn_, 5);
        let pr = pr_curve(&scores, &labels).unwrap();
        assert_eq!(pr.last().unwrap().x, 1.0);
        let roc = roc_curve(&scores, &labels).unwrap();
        assert_eq!((roc.last().unwrap().x, roc.last().unwrap().y), (1.0, 1.0));
    }

    fn labeled(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2..max).prop_flat_map(|n| {
            (
                prop::collection::vec(-3.0f64..3.0, n),
                prop::collection::vec(prop::bool::ANY, n),
            )
        })
        .prop_filter("both classes", |(_, l)| l.iter().any(|&b| b) && l.iter().any(|&b| !b))
        .prop_map(|(s, l)| (s, l.into_iter().map(|b| if b { 1.0 } else { -1.0 }).collect()))
    }

    proptest! {
        #[test]
        fn metrics_invariant_under_monotone_transform((s, l) in labeled(40)) {
            let t: Vec<f64> = s.iter().map(|v| (2.0 * v).exp() + 3.0).collect();
            prop_assert!((aupr(&s, &l).unwrap() - aupr(&t, &l).unwrap()).abs() < 1e-12);
            prop_assert!((auroc(&s, &l).unwrap() - auroc(&t, &l).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn calibrated_fpr_within_budget(s in prop::collection::vec(-2.0f64..2.0, 1..200), beta in 0.0f64..0.99) {
            let k = calibrate_threshold(&s, beta).unwrap();
            let below = s.iter().filter(|&&v| v < k).count() as f64;
            prop_assert!(below / s.len() as f64 <= beta);
            prop_assert!(s.contains(&k));
        }
    }
}
