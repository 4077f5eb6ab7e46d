use serde::{Deserialize, Serialize};

use super::Loss;
use crate::net::{self, hard_tanh, NetworkConfig, Parameters, Sample, Workspace};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    /// `max |analytic - numeric| / max(|analytic|, |numeric|, 1e-6)` over checked coordinates.
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates whose `±10·eps` neighbourhood crosses a kink.
    pub skipped: usize,
}

/// Every piecewise region the objective depends on: ReLU signs, clamp
/// segment and hinge side, per sample.
fn region_signature(
    params: &Parameters,
    config: &NetworkConfig,
    batch: &[Sample],
    loss: Loss,
    ws: &mut Workspace,
    out: &mut Vec<i8>,
) {
    out.clear();
    for s in batch {
        let raw = net::forward_raw(params, config, &s.x, ws);
        for layer in &ws.pre {
            out.extend(layer.iter().map(|&z| (z > 0.0) as i8 - (z < 0.0) as i8));
        }
        let f = match config.clamp_tau {
            Some(tau) => {
                out.push(if raw >= tau { 1 } else if raw > -tau { 0 } else if raw == -tau { 2 } else { -1 });
                hard_tanh(raw, tau)
            }
            None => raw,
        };
        if loss == Loss::Hinge {
            let t = s.y * f;
            out.push((t > 1.0) as i8 - (t < 1.0) as i8);
        }
    }
}

/// Compares [`net::backward`] with central differences of step `eps`.
pub fn grad_check(
    params: &Parameters,
    config: &NetworkConfig,
    batch: &[Sample],
    loss: Loss,
    eps: f64,
) -> Result<GradCheckReport> {
    let analytic = net::backward(params, config, batch, loss)?;
    let mut ws = Workspace::new(config);
    let mut base_sig = Vec::new();
    let mut sig = Vec::new();
    region_signature(params, config, batch, loss, &mut ws, &mut base_sig);

    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    for i in 0..params.len() {
        let orig = params.values()[i];
        let mut near_kink = false;
        for delta in [10.0 * eps, -10.0 * eps] {
            probe.values_mut()[i] = orig + delta;
            region_signature(&probe, config, batch, loss, &mut ws, &mut sig);
            near_kink |= sig != base_sig;
        }
        if near_kink {
            probe.values_mut()[i] = orig;
            report.skipped += 1;
            continue;
        }
        probe.values_mut()[i] = orig + eps;
        let up = net::batch_loss(&probe, config, batch, loss);
        probe.values_mut()[i] = orig - eps;
        let down = net::batch_loss(&probe, config, batch, loss);
        probe.values_mut()[i] = orig;

        let numeric = (up - down) / (2.0 * eps);
        let a = analytic.values()[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        report.max_rel_error = report.max_rel_error.max(rel);
        report.checked += 1;
    }
    Ok(report)
}
