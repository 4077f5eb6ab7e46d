use serde::{Deserialize, Serialize};

use crate::net::Parameters;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Coupled L2: `λ θ` is added to the gradient before the moment updates.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut Parameters,
    grads: &Parameters,
    cfg: &AdamConfig,
) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::ShapeMismatch(format!(
            "adam: params {}, grads {}, state {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let lambda = cfg.weight_decay;
    for (((theta, g), m), v) in params
        .values_mut()
        .iter_mut()
        .zip(grads.values())
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        let g = g + lambda * *theta;
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *theta -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{init_params, Activation, NetworkConfig};

    fn net() -> (NetworkConfig, Parameters) {
        let mut cfg = NetworkConfig::new(2, vec![3], Activation::Relu);
        cfg.init_seed = 9;
        let p = init_params(&cfg).unwrap();
        (cfg, p)
    }

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let (cfg, mut p) = net();
        let before = p.clone();
        let mut st = AdamState::new(p.len());
        let c = AdamConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        for _ in 0..5 {
            adam_step(&mut st, &mut p, &Parameters::zeros(&cfg), &c).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_is_signed_learning_rate() {
        // m_hat = g and v_hat = g^2 after one step, so Δθ = -lr g / (|g| + eps).
        let (cfg, mut p) = net();
        let before = p.clone();
        let mut g = Parameters::zeros(&cfg);
        for (i, v) in g.values_mut().iter_mut().enumerate() {
            *v = if i % 2 == 0 { 0.3 } else { -2.0 };
        }
        let c = AdamConfig {
            learning_rate: 0.01,
            weight_decay: 0.0,
            ..Default::default()
        };
        let mut st = AdamState::new(p.len());
        adam_step(&mut st, &mut p, &g, &c).unwrap();
        for ((a, b), gi) in p.values().iter().zip(before.values()).zip(g.values()) {
            let expected = -0.01 * gi / (gi.abs() + 1e-8);
            assert!((a - b - expected).abs() < 1e-12);
            assert!((a - b + 0.01 * gi.signum()).abs() < 1e-8);
        }
    }

    #[test]
    fn pure_decay_shrinks_sup_norm() {
        let (cfg, mut p) = net();
        let c = AdamConfig {
            learning_rate: 1e-3,
            weight_decay: 0.1,
            ..Default::default()
        };
        let mut st = AdamState::new(p.len());
        let zero = Parameters::zeros(&cfg);
        let mut prev = p.max_abs();
        for _ in 0..50 {
            adam_step(&mut st, &mut p, &zero, &c).unwrap();
            let now = p.max_abs();
            assert!(now < prev);
            prev = now;
        }
    }

    #[test]
    fn shape_mismatch() {
        let (_, mut p) = net();
        let other = NetworkConfig::new(2, vec![4], Activation::Relu);
        let mut st = AdamState::new(p.len());
        assert!(adam_step(&mut st, &mut p, &Parameters::zeros(&other), &AdamConfig::default()).is_err());
    }
}
