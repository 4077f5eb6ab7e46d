use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{rng, Error, Matrix, Result};

/// Piecewise-constant density on `[0,1]^d` over an axis-aligned grid.
///
/// Cells are indexed row-major with the last axis varying fastest. Cells are
/// left-closed, except that the right end `1` belongs to the last cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDensity", into = "RawDensity")]
pub struct SyntheticDensity {
    breakpoints: Vec<Vec<f64>>,
    values: Vec<f64>,
    strides: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawDensity {
    breakpoints: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl TryFrom<RawDensity> for SyntheticDensity {
    type Error = Error;
    fn try_from(r: RawDensity) -> Result<Self> {
        SyntheticDensity::new(r.breakpoints, r.values)
    }
}

impl From<SyntheticDensity> for RawDensity {
    fn from(d: SyntheticDensity) -> Self {
        RawDensity {
            breakpoints: d.breakpoints,
            values: d.values,
        }
    }
}

pub const MASS_TOLERANCE: f64 = 1e-12;

fn check_grid(breakpoints: &[Vec<f64>], values: &[f64]) -> Result<()> {
    if breakpoints.is_empty() {
        return Err(Error::InvalidConfig("density needs at least one axis".into()));
    }
    for (axis, b) in breakpoints.iter().enumerate() {
        let ok = b.len() >= 2
            && b[0] == 0.0
            && b[b.len() - 1] == 1.0
            && b.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "axis {axis}: breakpoints must increase strictly from 0 to 1"
            )));
        }
    }
    let cells: usize = breakpoints.iter().map(|b| b.len() - 1).product();
    if values.len() != cells {
        return Err(Error::DimensionMismatch {
            expected: cells,
            got: values.len(),
        });
    }
    if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidConfig("density values must be finite and >= 0".into()));
    }
    Ok(())
}

impl SyntheticDensity {
    pub fn new(breakpoints: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        check_grid(&breakpoints, &values)?;
        let d = Self::unchecked(breakpoints, values);
        let mass = d.total_mass();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidConfig(format!(
                "density integrates to {mass}, expected 1"
            )));
        }
        Ok(d)
    }

    /// Rescales `values` so the density integrates to one.
    pub fn normalized(breakpoints: Vec<Vec<f64>>, mut values: Vec<f64>) -> Result<Self> {
        check_grid(&breakpoints, &values)?;
        let mass = Self::unchecked(breakpoints.clone(), values.clone()).total_mass();
        if !(mass > 0.0) {
            return Err(Error::InvalidConfig("density has zero mass".into()));
        }
        for v in &mut values {
            *v /= mass;
        }
        Self::new(breakpoints, values)
    }

    fn unchecked(breakpoints: Vec<Vec<f64>>, values: Vec<f64>) -> Self {
        let mut strides = vec![1; breakpoints.len()];
        for a in (0..breakpoints.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * (breakpoints[a + 1].len() - 1);
        }
        Self {
            breakpoints,
            values,
            strides,
        }
    }

    /// Regular grid with `k` cells on every axis.
    pub fn regular(d: usize, k: usize, values: Vec<f64>) -> Result<Self> {
        let axis: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
        Self::new(vec![axis; d], values)
    }

    pub fn uniform(d: usize) -> Self {
        Self::new(vec![vec![0.0, 1.0]; d], vec![1.0]).expect("uniform density is valid")
    }

    pub fn dim(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn breakpoints(&self) -> &[Vec<f64>] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn num_cells(&self) -> usize {
        self.values.len()
    }

    pub fn total_mass(&self) -> f64 {
        (0..self.num_cells())
            .map(|c| self.values[c] * self.cell_volume(c))
            .sum()
    }

    /// Per-axis interval index of cell `c`.
    pub fn cell_coords(&self, c: usize) -> Vec<usize> {
        self.strides
            .iter()
            .zip(&self.breakpoints)
            .map(|(&s, b)| (c / s) % (b.len() - 1))
            .collect()
    }

    pub fn cell_bounds(&self, c: usize) -> (Vec<f64>, Vec<f64>) {
        let coords = self.cell_coords(c);
        let lo = coords.iter().zip(&self.breakpoints).map(|(&i, b)| b[i]).collect();
        let hi = coords.iter().zip(&self.breakpoints).map(|(&i, b)| b[i + 1]).collect();
        (lo, hi)
    }

    pub fn cell_volume(&self, c: usize) -> f64 {
        let (lo, hi) = self.cell_bounds(c);
        lo.iter().zip(&hi).map(|(l, h)| h - l).product()
    }

    /// Index of the cell containing `x`, or an error outside `[0,1]^d`.
    pub fn cell_of(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mut c = 0;
        for ((&xi, b), &stride) in x.iter().zip(&self.breakpoints).zip(&self.strides) {
            if !(0.0..=1.0).contains(&xi) {
                return Err(Error::OutsideDomain(x.to_vec()));
            }
            let k = b.len() - 1;
            let i = (b.partition_point(|&v| v <= xi) - 1).min(k - 1);
            c += i * stride;
        }
        Ok(c)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(self.values[self.cell_of(x)?])
    }

    /// `n` i.i.d. draws from `Q`: a cell with probability `value · volume`,
    /// then a uniform point inside it.
    pub fn sample(&self, n: usize, seed: u64) -> Matrix {
        let mut cum = Vec::with_capacity(self.num_cells());
        let mut acc = 0.0;
        for c in 0..self.num_cells() {
            acc += self.values[c] * self.cell_volume(c);
            cum.push(acc);
        }
        let total = acc;
        let mut r = rng::seeded(seed);
        let mut out = Matrix::zeros(n, self.dim());
        for i in 0..n {
            let u = r.gen::<f64>() * total;
            let c = cum.partition_point(|&m| m <= u).min(self.num_cells() - 1);
            let (lo, hi) = self.cell_bounds(c);
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = lo[j] + (hi[j] - lo[j]) * r.gen::<f64>();
            }
        }
        out
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string_pretty(self)?;
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }
}
