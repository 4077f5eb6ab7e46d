//! Feed-forward ReLU networks `x ↦ a · σ(W_L σ(… σ(W_1 x + b_1) …) + b_L)`.
//!
//! Parameters live in one flat buffer (`W_1, b_1, …, W_L, b_L, a`, weights
//! row-major with shape `p_i × p_{i-1}`), which keeps the optimizer, the
//! checkpoint format and the sparsity audit trivially layer-ordered.
//! The optional hard-tanh clamp is applied to the scalar output only.

mod activation;
pub mod checkpoint;
mod class;

pub use activation::{hard_tanh, hard_tanh_derivative, hard_tanh_relu, relu, Activation};
pub use class::{check_class_membership, param_stats, ClassSpec, ParamStats, Violation};
pub use checkpoint::Checkpoint;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::optim::Loss;
use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub activation: Activation,
    /// When set, the output passes through `σ_τ` and lies in `[-1, 1]`.
    #[serde(default)]
    pub clamp_tau: Option<f64>,
    #[serde(default)]
    pub init_seed: u64,
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
}

fn default_init_scale() -> f64 {
    1.0
}

impl NetworkConfig {
    pub fn new(input_dim: usize, hidden_widths: Vec<usize>, activation: Activation) -> Self {
        Self {
            input_dim,
            hidden_widths,
            activation,
            clamp_tau: None,
            init_seed: 0,
            init_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidConfig("input_dim must be positive".into()));
        }
        if self.hidden_widths.is_empty() || self.hidden_widths.contains(&0) {
            return Err(Error::InvalidConfig(
                "hidden_widths must be non-empty with positive entries".into(),
            ));
        }
        if let Some(tau) = self.clamp_tau {
            if !(tau > 0.0 && tau <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "clamp_tau must lie in (0,1], got {tau}"
                )));
            }
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::InvalidConfig("init_scale must be finite and >= 0".into()));
        }
        self.activation.validate().map_err(Error::InvalidConfig)
    }

    pub fn depth(&self) -> usize {
        self.hidden_widths.len()
    }

    /// Layer widths `p_0 = d, p_1, …, p_L`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden_widths.len() + 1);
        w.push(self.input_dim);
        w.extend_from_slice(&self.hidden_widths);
        w
    }

    pub fn param_count(&self) -> usize {
        param_count(&self.widths())
    }
}

fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[1] * w[0] + w[1]).sum::<usize>() + widths[widths.len() - 1]
}

/// Network parameters `θ = {W, b, a}` in a flat, layer-ordered buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    widths: Vec<usize>,
    values: Vec<f64>,
}

impl Parameters {
    pub fn zeros(config: &NetworkConfig) -> Self {
        let widths = config.widths();
        let n = param_count(&widths);
        Self {
            widths,
            values: vec![0.0; n],
        }
    }

    pub fn from_values(config: &NetworkConfig, values: Vec<f64>) -> Result<Self> {
        let widths = config.widths();
        let expected = param_count(&widths);
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("parameters must be finite".into()));
        }
        Ok(Self { widths, values })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    fn layer_offset(&self, layer: usize) -> usize {
        self.widths[..=layer]
            .windows(2)
            .map(|w| w[1] * w[0] + w[1])
            .sum()
    }

    /// Weights of hidden layer `layer` (0-based), row-major `p_{i} × p_{i-1}`.
    pub fn weights(&self, layer: usize) -> &[f64] {
        let o = self.layer_offset(layer);
        let n = self.widths[layer + 1] * self.widths[layer];
        &self.values[o..o + n]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        let o = self.layer_offset(layer);
        let n = self.widths[layer + 1] * self.widths[layer];
        &mut self.values[o..o + n]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        let o = self.layer_offset(layer) + self.widths[layer + 1] * self.widths[layer];
        &self.values[o..o + self.widths[layer + 1]]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut [f64] {
        let o = self.layer_offset(layer) + self.widths[layer + 1] * self.widths[layer];
        let n = self.widths[layer + 1];
        &mut self.values[o..o + n]
    }

    pub fn outer(&self) -> &[f64] {
        let n = self.widths[self.widths.len() - 1];
        &self.values[self.values.len() - n..]
    }

    pub fn outer_mut(&mut self) -> &mut [f64] {
        let n = self.widths[self.widths.len() - 1];
        let len = self.values.len();
        &mut self.values[len - n..]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    fn check_shape(&self, config: &NetworkConfig) -> Result<()> {
        if self.widths != config.widths() {
            return Err(Error::ShapeMismatch(format!(
                "parameters have widths {:?}, config expects {:?}",
                self.widths,
                config.widths()
            )));
        }
        Ok(())
    }
}

/// Symmetric uniform initialization with bound `init_scale / sqrt(fan_in)` per layer.
pub fn init_params(config: &NetworkConfig) -> Result<Parameters> {
    config.validate()?;
    let mut rng = rng::seeded(config.init_seed);
    let mut params = Parameters::zeros(config);
    let widths = config.widths();
    let mut draw = |slot: &mut [f64], fan_in: usize| {
        let bound = config.init_scale / (fan_in as f64).sqrt();
        for v in slot {
            *v = bound * (2.0 * rng.gen::<f64>() - 1.0);
        }
    };
    for layer in 0..widths.len() - 1 {
        draw(params.weights_mut(layer), widths[layer]);
        draw(params.bias_mut(layer), widths[layer]);
    }
    draw(params.outer_mut(), widths[widths.len() - 1]);
    Ok(params)
}

/// Scratch buffers for forward/backward passes.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    pub(crate) pre: Vec<Vec<f64>>,
    pub(crate) post: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Workspace {
    pub fn new(config: &NetworkConfig) -> Self {
        let pre: Vec<Vec<f64>> = config.hidden_widths.iter().map(|&w| vec![0.0; w]).collect();
        let max_w = config.hidden_widths.iter().copied().max().unwrap_or(0);
        Self {
            post: pre.clone(),
            pre,
            delta: vec![0.0; max_w],
            delta_prev: vec![0.0; max_w],
        }
    }

    pub(crate) fn fits(&self, config: &NetworkConfig) -> bool {
        self.pre.len() == config.hidden_widths.len()
            && self
                .pre
                .iter()
                .zip(&config.hidden_widths)
                .all(|(p, &w)| p.len() == w)
    }
}

/// Pre-clamp output `a · h_L`, filling the workspace with every layer's
/// pre- and post-activations.
pub(crate) fn forward_raw(params: &Parameters, config: &NetworkConfig, x: &[f64], ws: &mut Workspace) -> f64 {
    let widths = &params.widths;
    for layer in 0..widths.len() - 1 {
        let (n_in, n_out) = (widths[layer], widths[layer + 1]);
        let w = params.weights(layer);
        let b = params.bias(layer);
        let (before, rest) = ws.post.split_at_mut(layer);
        let input: &[f64] = if layer == 0 { x } else { &before[layer - 1] };
        let pre = &mut ws.pre[layer];
        let post = &mut rest[0];
        for j in 0..n_out {
            let row = &w[j * n_in..(j + 1) * n_in];
            let z = row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>() + b[j];
            pre[j] = z;
            post[j] = config.activation.apply(z);
        }
    }
    let last = &ws.post[widths.len() - 2];
    params.outer().iter().zip(last).map(|(a, h)| a * h).sum()
}

fn check_input(config: &NetworkConfig, x: &[f64]) -> Result<()> {
    if x.len() != config.input_dim {
        return Err(Error::DimensionMismatch {
            expected: config.input_dim,
            got: x.len(),
        });
    }
    Ok(())
}

/// Network output: `σ_τ(a·…)` when `clamp_tau` is set, the raw scalar otherwise.
pub fn forward(params: &Parameters, config: &NetworkConfig, x: &[f64]) -> Result<f64> {
    params.check_shape(config)?;
    check_input(config, x)?;
    let mut ws = Workspace::new(config);
    Ok(forward_with(params, config, x, &mut ws))
}

/// [`forward`] without validation, reusing caller-owned buffers.
pub fn forward_with(params: &Parameters, config: &NetworkConfig, x: &[f64], ws: &mut Workspace) -> f64 {
    if !ws.fits(config) {
        *ws = Workspace::new(config);
    }
    let raw = forward_raw(params, config, x, ws);
    match config.clamp_tau {
        Some(tau) => hard_tanh(raw, tau),
        None => raw,
    }
}

/// One weighted, labeled training point.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    /// `+1` for normal, `-1` for anomaly.
    pub y: f64,
    pub weight: f64,
}

/// Adds `weight · ∇_θ ℓ(y f(x))` into `grad` and returns `weight · ℓ(y f(x))`.
///
/// Subgradient 0 is used at the hinge kink, ReLU kinks and clamp kinks.
pub fn accumulate_gradient(
    params: &Parameters,
    config: &NetworkConfig,
    x: &[f64],
    y: f64,
    weight: f64,
    loss: Loss,
    grad: &mut Parameters,
    ws: &mut Workspace,
) -> f64 {
    if !ws.fits(config) {
        *ws = Workspace::new(config);
    }
    let raw = forward_raw(params, config, x, ws);
    let (out, dout_draw) = match config.clamp_tau {
        Some(tau) => (hard_tanh(raw, tau), hard_tanh_derivative(raw, tau)),
        None => (raw, 1.0),
    };
    let margin = y * out;
    let value = weight * loss.value(margin);
    let g = weight * y * loss.derivative(margin) * dout_draw;
    if g == 0.0 {
        return value;
    }

    let widths = &params.widths;
    let depth = widths.len() - 1;
    {
        let h_last = &ws.post[depth - 1];
        for (ga, h) in grad.outer_mut().iter_mut().zip(h_last) {
            *ga += g * h;
        }
    }
    let outer = params.outer();
    let n_last = widths[depth];
    for j in 0..n_last {
        ws.delta[j] = g * outer[j] * config.activation.derivative(ws.pre[depth - 1][j]);
    }

    for layer in (0..depth).rev() {
        let (n_in, n_out) = (widths[layer], widths[layer + 1]);
        let input: &[f64] = if layer == 0 { x } else { &ws.post[layer - 1] };
        {
            let gw = grad.weights_mut(layer);
            for j in 0..n_out {
                let dj = ws.delta[j];
                if dj == 0.0 {
                    continue;
                }
                let row = &mut gw[j * n_in..(j + 1) * n_in];
                for (r, xi) in row.iter_mut().zip(input) {
                    *r += dj * xi;
                }
            }
        }
        {
            let gb = grad.bias_mut(layer);
            for j in 0..n_out {
                gb[j] += ws.delta[j];
            }
        }
        if layer > 0 {
            let w = params.weights(layer);
            for i in 0..n_in {
                ws.delta_prev[i] = 0.0;
            }
            for j in 0..n_out {
                let dj = ws.delta[j];
                if dj == 0.0 {
                    continue;
                }
                let row = &w[j * n_in..(j + 1) * n_in];
                for (acc, wji) in ws.delta_prev[..n_in].iter_mut().zip(row) {
                    *acc += dj * wji;
                }
            }
            let pre = &ws.pre[layer - 1];
            for i in 0..n_in {
                ws.delta_prev[i] *= config.activation.derivative(pre[i]);
            }
            std::mem::swap(&mut ws.delta, &mut ws.delta_prev);
        }
    }
    value
}

/// Gradient of `Σ weight_i · ℓ(y_i f(x_i))` with respect to every parameter.
pub fn backward(
    params: &Parameters,
    config: &NetworkConfig,
    batch: &[Sample],
    loss: Loss,
) -> Result<Parameters> {
    params.check_shape(config)?;
    if batch.is_empty() {
        return Err(Error::Empty("batch".into()));
    }
    let mut grad = Parameters::zeros(config);
    let mut ws = Workspace::new(config);
    for s in batch {
        check_input(config, &s.x)?;
        accumulate_gradient(params, config, &s.x, s.y, s.weight, loss, &mut grad, &mut ws);
    }
    Ok(grad)
}

/// Weighted batch objective `Σ weight_i · ℓ(y_i f(x_i))`.
pub fn batch_loss(params: &Parameters, config: &NetworkConfig, batch: &[Sample], loss: Loss) -> f64 {
    let mut ws = Workspace::new(config);
    batch
        .iter()
        .map(|s| s.weight * loss.value(s.y * forward_with(params, config, &s.x, &mut ws)))
        .sum()
}

/// A configured network with its parameters, usable as a scoring function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub config: NetworkConfig,
    pub params: Parameters,
}

impl Network {
    pub fn new(config: NetworkConfig, params: Parameters) -> Result<Self> {
        config.validate()?;
        params.check_shape(&config)?;
        Ok(Self { config, params })
    }

    pub fn init(config: NetworkConfig) -> Result<Self> {
        let params = init_params(&config)?;
        Ok(Self { config, params })
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let mut ws = Workspace::new(&self.config);
        forward_with(&self.params, &self.config, x, &mut ws)
    }

    /// Scores every row of `xs`.
    pub fn score_rows(&self, xs: &crate::Matrix) -> Vec<f64> {
        let mut ws = Workspace::new(&self.config);
        xs.iter_rows()
            .map(|x| forward_with(&self.params, &self.config, x, &mut ws))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn one_unit(w: f64, b: f64, a: f64) -> (NetworkConfig, Parameters) {
        let cfg = NetworkConfig::new(1, vec![1], Activation::Relu);
        let p = Parameters::from_values(&cfg, vec![w, b, a]).unwrap();
        (cfg, p)
    }

    #[test]
    fn layout_accessors() {
        let cfg = NetworkConfig::new(2, vec![3, 2], Activation::Relu);
        assert_eq!(cfg.param_count(), (3 * 2 + 3) + (2 * 3 + 2) + 2);
        let values: Vec<f64> = (0..cfg.param_count()).map(|v| v as f64).collect();
        let p = Parameters::from_values(&cfg, values).unwrap();
        assert_eq!(p.weights(0), &[0., 1., 2., 3., 4., 5.]);
        assert_eq!(p.bias(0), &[6., 7., 8.]);
        assert_eq!(p.weights(1).len(), 6);
        assert_eq!(p.bias(1), &[15., 16.]);
        assert_eq!(p.outer(), &[17., 18.]);
    }

    #[test]
    fn init_is_deterministic_and_scaled() {
        let mut cfg = NetworkConfig::new(2, vec![3], Activation::Relu);
        cfg.init_seed = 11;
        assert_eq!(init_params(&cfg).unwrap(), init_params(&cfg).unwrap());
        let p = init_params(&cfg).unwrap();
        assert!(p.weights(0).iter().all(|v| v.abs() <= 1.0 / 2f64.sqrt()));
        assert!(p.outer().iter().all(|v| v.abs() <= 1.0 / 3f64.sqrt()));
        cfg.init_scale = 0.0;
        assert!(init_params(&cfg).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn init_mean_is_centered() {
        // Each entry is U(-b, b) with b = 1/sqrt(fan_in); the sample mean over
        // all entries of 10^4 re-seeded draws must sit within 4 standard errors.
        let mut cfg = NetworkConfig::new(2, vec![3], Activation::Relu);
        let mut sum = 0.0;
        let mut var = 0.0f64;
        let mut count = 0usize;
        for seed in 0..10_000 {
            cfg.init_seed = seed;
            let p = init_params(&cfg).unwrap();
            for (slot, fan_in) in [(p.weights(0), 2.0), (p.bias(0), 2.0), (p.outer(), 3.0)] {
                for v in slot {
                    sum += v;
                    var += 1.0 / (3.0 * fan_in);
                    count += 1;
                }
            }
        }
        let mean = sum / count as f64;
        let se = var.sqrt() / count as f64;
        assert!(mean.abs() < 4.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn forward_examples() {
        let cfg = NetworkConfig::new(3, vec![4, 4], Activation::Relu);
        let zero = Parameters::zeros(&cfg);
        assert_eq!(forward(&zero, &cfg, &[0.3, 0.1, 0.9]).unwrap(), 0.0);
        let mut clamped = cfg.clone();
        clamped.clamp_tau = Some(0.5);
        assert_eq!(forward(&zero, &clamped, &[0.3, 0.1, 0.9]).unwrap(), 0.0);

        let (c, p) = one_unit(1.0, 0.0, 1.0);
        assert_eq!(forward(&p, &c, &[-2.0]).unwrap(), 0.0);
        assert_eq!(forward(&p, &c, &[2.0]).unwrap(), 2.0);

        // pre-clamp 0.7 with tau 0.5 saturates to 1
        let (mut c, p) = one_unit(1.0, 0.0, 0.7);
        assert_eq!(forward(&p, &c, &[1.0]).unwrap(), 0.7);
        c.clamp_tau = Some(0.5);
        assert_eq!(forward(&p, &c, &[1.0]).unwrap(), 1.0);

        assert!(matches!(
            forward(&p, &c, &[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn clamped_output_in_range() {
        let mut cfg = NetworkConfig::new(2, vec![8, 8], Activation::leaky());
        cfg.clamp_tau = Some(0.1);
        cfg.init_scale = 3.0;
        let p = init_params(&cfg).unwrap();
        let mut rng = rng::seeded(3);
        for _ in 0..1000 {
            let x = [rng.gen::<f64>() * 4.0 - 2.0, rng.gen::<f64>() * 4.0 - 2.0];
            let y = forward(&p, &cfg, &x).unwrap();
            assert!((-1.0..=1.0).contains(&y));
            assert_eq!(y, forward(&p, &cfg, &x).unwrap());
        }
    }

    #[test]
    fn flat_hinge_gives_zero_gradient() {
        let (c, p) = one_unit(2.0, 0.0, 1.0);
        let batch = vec![
            Sample { x: vec![1.0], y: 1.0, weight: 1.0 },
            Sample { x: vec![3.0], y: 1.0, weight: 0.5 },
        ];
        let g = backward(&p, &c, &batch, Loss::Hinge).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dead_network_gradient() {
        let cfg = NetworkConfig::new(2, vec![3, 3], Activation::Relu);
        let zero = Parameters::zeros(&cfg);
        let batch = vec![Sample { x: vec![0.2, 0.8], y: -1.0, weight: 1.0 }];
        let g = backward(&zero, &cfg, &batch, Loss::Hinge).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
        assert!(backward(&zero, &cfg, &[], Loss::Hinge).is_err());
    }

    #[test]
    fn single_unit_gradient_by_hand() {
        // f = a relu(w x + b); hinge active with y = -1: d/dθ of (1 + f).
        let (c, p) = one_unit(0.5, 0.25, 2.0);
        let batch = vec![Sample { x: vec![1.0], y: -1.0, weight: 3.0 }];
        let g = backward(&p, &c, &batch, Loss::Hinge).unwrap();
        assert_eq!(g.weights(0), &[3.0 * 2.0 * 1.0]);
        assert_eq!(g.bias(0), &[3.0 * 2.0]);
        assert_eq!(g.outer(), &[3.0 * 0.75]);
    }
}
