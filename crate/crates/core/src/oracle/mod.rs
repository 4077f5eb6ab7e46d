//! Ground-truth world for the synthetic-anomaly setting.
//!
//! Normals follow `Q = h dμ` for a piecewise-constant density `h` on
//! `[0,1]^d` and `μ` uniform. With `s = 1/(1+ρ)` the label model is
//! `η(x) = s h(x) / (s h(x) + 1 - s)`, the Bayes classifier is
//! `sign(h - ρ)`, and every risk is an integral of a function of `(h, f)`
//! against `μ`, which is evaluated per cell (exactly when `f` is constant on
//! cells, by adaptive cubature otherwise) or by Monte Carlo.

mod density;
mod integrate;
pub mod named;
mod noise;

pub use density::{SyntheticDensity, MASS_TOLERANCE};
pub use integrate::Cubature;
pub use noise::{geometric_grid, noise_profile, NoiseExponent, NoiseProfile};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::optim::hinge;
use crate::{rng, sign, Error, Matrix, Result, Scorer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleProblem {
    density: SyntheticDensity,
    rho: f64,
    s: f64,
}

/// How to evaluate an integral against `μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Integration {
    /// Per-cell adaptive cubature to the given tolerance.
    Exact { tol: f64 },
    MonteCarlo { samples: usize, seed: u64 },
}

impl Default for Integration {
    fn default() -> Self {
        Integration::Exact { tol: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    /// Monte Carlo standard error; 0 for cubature.
    pub std_error: f64,
}

impl OracleProblem {
    /// Rejects `ρ ≤ 0` and any cell whose value equals `ρ`, so that the
    /// boundary `{h = ρ}` is `μ`-null.
    pub fn new(density: SyntheticDensity, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidConfig(format!("rho must be positive, got {rho}")));
        }
        if density.values().iter().any(|&v| v == rho) {
            return Err(Error::InvalidConfig(format!(
                "a cell value equals rho = {rho}; the level-set boundary must be null"
            )));
        }
        Ok(Self {
            density,
            rho,
            s: 1.0 / (1.0 + rho),
        })
    }

    /// Problem with normal weight `s`, i.e. `ρ = (1 - s)/s`.
    pub fn with_s(density: SyntheticDensity, s: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidConfig(format!("s must lie in (0,1), got {s}")));
        }
        let mut p = Self::new(density, (1.0 - s) / s)?;
        p.s = s;
        Ok(p)
    }

    pub fn density(&self) -> &SyntheticDensity {
        &self.density
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn dim(&self) -> usize {
        self.density.dim()
    }

    pub fn eta_of_value(&self, h: f64) -> f64 {
        self.s * h / (self.s * h + 1.0 - self.s)
    }

    pub fn eta(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eta_of_value(self.density.eval(x)?))
    }

    /// `+1` iff `h(x) > ρ`.
    pub fn bayes_classifier(&self, x: &[f64]) -> Result<f64> {
        let h = self.density.eval(x)?;
        Ok(if h > self.rho { 1.0 } else { -1.0 })
    }

    /// `+1` iff `η(x) > 1/2`; agrees with [`Self::bayes_classifier`].
    pub fn bayes_classifier_eta(&self, x: &[f64]) -> Result<f64> {
        Ok(if self.eta(x)? > 0.5 { 1.0 } else { -1.0 })
    }

    /// `f_c` as a cell-constant function.
    pub fn bayes_cell_function(&self) -> CellFunction {
        let values = self
            .density
            .values()
            .iter()
            .map(|&h| if h > self.rho { 1.0 } else { -1.0 })
            .collect();
        CellFunction::new(self.density.clone(), values).expect("one value per cell")
    }

    /// `R* = s Σ_{h≤ρ} h·vol + (1-s) Σ_{h>ρ} vol`.
    pub fn bayes_risk(&self) -> f64 {
        let d = &self.density;
        (0..d.num_cells())
            .map(|c| {
                let (h, vol) = (d.values()[c], d.cell_volume(c));
                if h > self.rho {
                    (1.0 - self.s) * vol
                } else {
                    self.s * h * vol
                }
            })
            .sum()
    }

    /// `∫ k(h(x), f(x)) dμ(x)`.
    fn integrate<F, K>(&self, f: &F, mode: Integration, continuous: bool, k: K) -> Result<Estimate>
    where
        F: Scorer + ?Sized,
        K: Fn(f64, f64) -> f64,
    {
        let d = &self.density;
        match mode {
            Integration::Exact { tol } => {
                let cub = if continuous {
                    Cubature::for_dim(d.dim(), tol)
                } else {
                    Cubature::indicator(d.dim(), tol)
                };
                let mut total = 0.0;
                for c in 0..d.num_cells() {
                    let h = d.values()[c];
                    let (lo, hi) = d.cell_bounds(c);
                    total += cub.integrate(&lo, &hi, &mut |x: &[f64]| k(h, f.score(x)));
                }
                Ok(Estimate {
                    value: total,
                    std_error: 0.0,
                })
            }
            Integration::MonteCarlo { samples, seed } => {
                if samples == 0 {
                    return Err(Error::InvalidConfig("Monte Carlo needs samples >= 1".into()));
                }
                let mut r = rng::seeded(seed);
                let mut x = vec![0.0; d.dim()];
                let (mut sum, mut sq) = (0.0, 0.0);
                for _ in 0..samples {
                    for v in x.iter_mut() {
                        *v = r.gen();
                    }
                    let v = k(d.eval(&x)?, f.score(&x));
                    sum += v;
                    sq += v * v;
                }
                let n = samples as f64;
                let mean = sum / n;
                let var = if samples > 1 {
                    ((sq - n * mean * mean) / (n - 1.0)).max(0.0)
                } else {
                    0.0
                };
                Ok(Estimate {
                    value: mean,
                    std_error: (var / n).sqrt(),
                })
            }
        }
    }

    /// `R(f) = s Q(sign f = -1) + (1-s) μ(sign f = +1)`, with `sign(0) = +1`.
    pub fn misclassification_risk<F: Scorer + ?Sized>(&self, f: &F, mode: Integration) -> Result<Estimate> {
        let s = self.s;
        self.integrate(f, mode, false, |h, v| {
            if sign(v) < 0.0 {
                s * h
            } else {
                1.0 - s
            }
        })
    }

    /// `ε(f) = s ∫ φ(f) dQ + (1-s) ∫ φ(-f) dμ` for the hinge loss `φ`.
    pub fn generalization_error<F: Scorer + ?Sized>(&self, f: &F, mode: Integration) -> Result<Estimate> {
        let s = self.s;
        self.integrate(f, mode, true, |h, v| s * h * hinge(v) + (1.0 - s) * hinge(-v))
    }

    /// `S(f) = μ({sign f = +1} Δ {h > ρ})`.
    pub fn level_set_error<F: Scorer + ?Sized>(&self, f: &F, mode: Integration) -> Result<Estimate> {
        let rho = self.rho;
        self.integrate(f, mode, false, |h, v| ((sign(v) > 0.0) != (h > rho)) as u8 as f64)
    }

    pub fn excess_risk<F: Scorer + ?Sized>(&self, f: &F, mode: Integration) -> Result<Estimate> {
        let r = self.misclassification_risk(f, mode)?;
        Ok(Estimate {
            value: r.value - self.bayes_risk(),
            std_error: r.std_error,
        })
    }

    /// `n` draws from `Q`.
    pub fn sample_q(&self, n: usize, seed: u64) -> Result<Matrix> {
        if n == 0 {
            return Err(Error::Empty("sample count".into()));
        }
        Ok(self.density.sample(n, seed))
    }

    /// Independent labels with `P(+1 | x) = η(x)`.
    pub fn sample_labels(&self, xs: &Matrix, seed: u64) -> Result<Vec<f64>> {
        let etas = xs.iter_rows().map(|x| self.eta(x)).collect::<Result<Vec<_>>>()?;
        Ok(bernoulli_labels(&etas, seed))
    }

    /// Draws from the marginal `P_X = s Q + (1 - s) μ`.
    pub fn sample_marginal(&self, n: usize, seed: u64) -> Result<Matrix> {
        Ok(self.sample_labeled(n, seed)?.0)
    }

    /// Labeled draws from the joint model: with probability `s` a point from
    /// `Q` labeled `+1`, otherwise a uniform point labeled `-1`.
    pub fn sample_labeled(&self, n: usize, seed: u64) -> Result<(Matrix, Vec<f64>)> {
        if n == 0 {
            return Err(Error::Empty("sample count".into()));
        }
        let mut r = rng::seeded(rng::derive_seed(seed, 11));
        let n_pos = (0..n).filter(|_| r.gen::<f64>() < self.s).count();
        let pos = self.density.sample(n_pos.max(1), rng::derive_seed(seed, 12));
        let mut xs = Matrix::zeros(0, self.dim());
        let mut ys = Vec::with_capacity(n);
        for i in 0..n_pos {
            xs.push_row(pos.row(i))?;
            ys.push(1.0);
        }
        let mut u = rng::seeded(rng::derive_seed(seed, 13));
        let mut x = vec![0.0; self.dim()];
        for _ in n_pos..n {
            for v in x.iter_mut() {
                *v = u.gen();
            }
            xs.push_row(&x)?;
            ys.push(-1.0);
        }
        Ok((xs, ys))
    }
}

/// One `±1` label per probability, `+1` with probability `p`.
pub fn bernoulli_labels(probs: &[f64], seed: u64) -> Vec<f64> {
    let mut r = rng::seeded(seed);
    probs
        .iter()
        .map(|&p| if r.gen::<f64>() < p { 1.0 } else { -1.0 })
        .collect()
}

/// A function constant on the cells of a density grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFunction {
    grid: SyntheticDensity,
    values: Vec<f64>,
}

impl CellFunction {
    pub fn new(grid: SyntheticDensity, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(Error::DimensionMismatch {
                expected: grid.num_cells(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl Scorer for CellFunction {
    fn score(&self, x: &[f64]) -> f64 {
        let c = self.grid.cell_of(x).expect("point inside the grid");
        self.values[c]
    }
}

impl OracleProblem {
    /// Closed-form `R(f)` for a function constant on this problem's cells.
    pub fn misclassification_risk_cells(&self, f: &CellFunction) -> f64 {
        self.cell_sum(f, |h, v| if sign(v) < 0.0 { self.s * h } else { 1.0 - self.s })
    }

    /// Closed-form `ε(f)` for a cell-constant `f`.
    pub fn generalization_error_cells(&self, f: &CellFunction) -> f64 {
        self.cell_sum(f, |h, v| self.s * h * hinge(v) + (1.0 - self.s) * hinge(-v))
    }

    /// Closed-form `S(f)` for a cell-constant `f`.
    pub fn level_set_error_cells(&self, f: &CellFunction) -> f64 {
        self.cell_sum(f, |h, v| ((sign(v) > 0.0) != (h > self.rho)) as u8 as f64)
    }

    fn cell_sum(&self, f: &CellFunction, k: impl Fn(f64, f64) -> f64) -> f64 {
        let d = &self.density;
        assert_eq!(f.values.len(), d.num_cells(), "cell function on a different grid");
        (0..d.num_cells())
            .map(|c| k(d.values()[c], f.values[c]) * d.cell_volume(c))
            .sum()
    }
}
