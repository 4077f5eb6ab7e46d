use serde::{Deserialize, Serialize};

use super::{OracleProblem, SyntheticDensity};
use crate::{Error, Result};

/// How the noise curve behaves near `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseExponent {
    /// Curve is 1 everywhere on the grid: `η ≡ 1/2` on the support, so `q = 0`.
    Plateau,
    /// Curve vanishes at the first grid point; `η` stays `gap` away from 1/2.
    HardMargin { gap: f64 },
    Fitted { q: f64 },
}

impl NoiseExponent {
    pub fn q(&self) -> f64 {
        match *self {
            NoiseExponent::Plateau => 0.0,
            NoiseExponent::HardMargin { .. } => f64::INFINITY,
            NoiseExponent::Fitted { q } => q,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    pub t_grid: Vec<f64>,
    /// `P_X(|η - 1/2| ≤ t)` at each grid point.
    pub curve: Vec<f64>,
    pub exponent: NoiseExponent,
}

/// Geometric grid of `count` points from `lo` to `hi`.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|i| lo * (ratio * i as f64).exp()).collect()
}

impl OracleProblem {
    pub fn noise_profile(&self, t_grid: &[f64]) -> Result<NoiseProfile> {
        noise_profile(self.density(), self.s(), t_grid)
    }
}

/// Noise curve under `P_X = s Q + (1 - s) μ`, with the cell mass
/// `(s h + 1 - s) vol` and `η = s h / (s h + 1 - s)` per cell.
///
/// Takes the density and `s` directly so that degenerate cases with
/// `h = ρ` on a whole cell (rejected by [`OracleProblem::new`]) can be probed.
pub fn noise_profile(density: &SyntheticDensity, s: f64, t_grid: &[f64]) -> Result<NoiseProfile> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidConfig(format!("s must lie in (0,1), got {s}")));
    }
    if t_grid.is_empty() {
        return Err(Error::Empty("t grid".into()));
    }
    if t_grid[0] <= 0.0 || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("t grid must be positive and strictly ascending".into()));
    }

    let cells: Vec<(f64, f64)> = (0..density.num_cells())
        .map(|c| {
            let h = density.values()[c];
            let denom = s * h + 1.0 - s;
            ((s * h / denom - 0.5).abs(), denom * density.cell_volume(c))
        })
        .collect();
    let total: f64 = cells.iter().map(|c| c.1).sum();
    let curve: Vec<f64> = t_grid
        .iter()
        .map(|&t| {
            let m: f64 = cells.iter().filter(|c| c.0 <= t).map(|c| c.1).sum();
            (m / total).min(1.0)
        })
        .collect();

    const ONE: f64 = 1.0 - 1e-12;
    let exponent = if curve.iter().all(|&v| v >= ONE) {
        NoiseExponent::Plateau
    } else if curve[0] == 0.0 {
        let gap = cells
            .iter()
            .filter(|c| c.1 > 0.0)
            .map(|c| c.0)
            .fold(f64::INFINITY, f64::min);
        NoiseExponent::HardMargin { gap }
    } else {
        fit_exponent(t_grid, &curve)?
    };
    Ok(NoiseProfile {
        t_grid: t_grid.to_vec(),
        curve,
        exponent,
    })
}

/// Log-log least squares over the first decade of `t` where the curve is
/// strictly inside `(0, 1)`.
fn fit_exponent(t_grid: &[f64], curve: &[f64]) -> Result<NoiseExponent> {
    let inside = |i: usize| curve[i] > 0.0 && curve[i] < 1.0 - 1e-12;
    let start = (0..t_grid.len())
        .find(|&i| inside(i))
        .ok_or_else(|| Error::InvalidConfig("noise curve never leaves {0, 1}".into()))?;
    let end = t_grid[start] * 10.0;
    let pts: Vec<(f64, f64)> = (start..t_grid.len())
        .take_while(|&i| t_grid[i] <= end * (1.0 + 1e-12))
        .filter(|&i| inside(i))
        .map(|i| (t_grid[i].ln(), curve[i].ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InvalidConfig(
            "fewer than two grid points in the fitting decade".into(),
        ));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(NoiseExponent::Fitted { q: sxy / sxx })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::named;

    #[test]
    fn constant_density_is_a_plateau() {
        let p = noise_profile(&SyntheticDensity::uniform(2), 0.5, &geometric_grid(1e-3, 0.4, 12)).unwrap();
        assert!(p.curve.iter().all(|&v| v == 1.0));
        assert_eq!(p.exponent, NoiseExponent::Plateau);
        assert_eq!(p.exponent.q(), 0.0);
    }

    #[test]
    fn bounded_eta_is_a_hard_margin() {
        let prob = named::margin1d();
        let grid = geometric_grid(1e-3, 0.45, 20);
        let p = prob.noise_profile(&grid).unwrap();
        for (&t, &v) in grid.iter().zip(&p.curve) {
            if t < 0.3 - 1e-9 {
                assert_eq!(v, 0.0, "t = {t}");
            }
        }
        match p.exponent {
            NoiseExponent::HardMargin { gap } => assert!((gap - 0.3).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert!(p.exponent.q().is_infinite());
    }

    #[test]
    fn staircase_has_linear_noise() {
        let prob = named::staircase1d();
        let p = prob.noise_profile(&geometric_grid(1e-3, 0.1, 25)).unwrap();
        let q = p.exponent.q();
        assert!((q - 1.0).abs() <= 0.1, "q = {q}");
    }

    #[test]
    fn grid_validation() {
        let h = SyntheticDensity::uniform(1);
        assert!(noise_profile(&h, 0.5, &[]).is_err());
        assert!(noise_profile(&h, 0.5, &[0.0, 0.1]).is_err());
        assert!(noise_profile(&h, 0.5, &[0.2, 0.1]).is_err());
        assert!(noise_profile(&h, 1.0, &[0.1]).is_err());
    }
}
