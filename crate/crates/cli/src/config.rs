use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tcad_core::net::{Activation, NetworkConfig};
use tcad_core::optim::TrainConfig;
use tcad_core::synth::{AnomalyRatioPolicy, SamplingSpace};

use crate::CliError;

/// One experiment: where the data comes from, the model, how to train it
/// and which seeds to repeat it over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: Source,
    #[serde(default)]
    pub net: NetSpec,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub ratio: AnomalyRatioPolicy,
    #[serde(default)]
    pub sampling: SamplingSpace,
    /// False-positive budget on validation normals for the threshold.
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Normal-sample sizes for convergence runs.
    #[serde(default)]
    pub n_grid: Vec<usize>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Source {
    /// A ground-truth problem, by name or from a density JSON file.
    Oracle {
        #[serde(default)]
        problem: Option<String>,
        #[serde(default)]
        density: Option<PathBuf>,
        /// Level `ρ`; defaults to the named problem's own.
        #[serde(default)]
        rho: Option<f64>,
        /// Normal weight `s`, an alternative to `rho` via `ρ = (1 - s)/s`.
        #[serde(default)]
        s: Option<f64>,
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_n_test")]
        n_test: usize,
    },
    /// A headed CSV file with a schema sidecar. Without a test file the
    /// training file is split by `split` (train, validation, test).
    Csv {
        train: PathBuf,
        #[serde(default)]
        test: Option<PathBuf>,
        schema: PathBuf,
        #[serde(default = "default_split")]
        split: [f64; 3],
        #[serde(default)]
        n: Option<usize>,
    },
    /// The NSL-KDD train and test files; the schema is fitted on `train`.
    NslKdd {
        train: PathBuf,
        test: PathBuf,
        #[serde(default)]
        attacks: AttackFamily,
        #[serde(default)]
        n: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackFamily {
    #[default]
    Dos,
    All,
}

/// Network shape in user terms: `depth` counts weight layers, so
/// `depth - 1` hidden layers of `width` units each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetSpec {
    pub depth: usize,
    pub width: usize,
    pub activation: Activation,
    pub clamp_tau: Option<f64>,
    pub init_scale: f64,
}

impl Default for NetSpec {
    fn default() -> Self {
        Self {
            depth: 3,
            width: 500,
            activation: Activation::leaky(),
            clamp_tau: None,
            init_scale: 1.0,
        }
    }
}

impl NetSpec {
    pub fn network_config(&self, input_dim: usize, init_seed: u64) -> Result<NetworkConfig, CliError> {
        if self.depth < 2 {
            return Err(CliError::Usage(format!(
                "net.depth must be at least 2 (one hidden layer), got {}",
                self.depth
            )));
        }
        let mut cfg = NetworkConfig::new(input_dim, vec![self.width; self.depth - 1], self.activation);
        cfg.clamp_tau = self.clamp_tau;
        cfg.init_scale = self.init_scale;
        cfg.init_seed = init_seed;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn default_beta() -> f64 {
    0.05
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

fn default_n() -> usize {
    2000
}

fn default_n_test() -> usize {
    20_000
}

fn default_split() -> [f64; 3] {
    [0.8, 0.1, 0.1]
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.seeds.is_empty() {
            return Err(CliError::Usage("seeds must be non-empty".into()));
        }
        if self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Usage("n_grid must be strictly ascending".into()));
        }
        if self.n_grid.contains(&0) {
            return Err(CliError::Usage("n_grid entries must be positive".into()));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(CliError::Usage(format!("beta must lie in (0,1), got {}", self.beta)));
        }
        if let Source::Oracle { problem, density, n, n_test, rho, s } = &self.source {
            if problem.is_some() == density.is_some() {
                return Err(CliError::Usage(
                    "oracle source needs exactly one of `problem` or `density`".into(),
                ));
            }
            if rho.is_some() && s.is_some() {
                return Err(CliError::Usage("give at most one of `rho` and `s`".into()));
            }
            if *n == 0 || *n_test == 0 {
                return Err(CliError::Usage("oracle n and n_test must be positive".into()));
            }
        }
        let mut train = self.train.clone();
        if let Source::Oracle { .. } = self.source {
            // the weight comes from the problem; checked once it is built
            train.s = 0.5;
        }
        train.validate()?;
        Ok(())
    }
}
