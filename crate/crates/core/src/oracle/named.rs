//! Ready-made oracle problems, addressable by name from experiment configs.

use super::{OracleProblem, SyntheticDensity};
use crate::{Error, Result};

pub const NAMES: &[&str] = &["square2d", "step1d", "separable1d", "uniform1d", "margin1d", "staircase1d"];

/// Look up a named problem; `rho` overrides its default threshold.
pub fn by_name(name: &str, rho: Option<f64>) -> Result<OracleProblem> {
    let p = match name {
        "square2d" => square2d(),
        "step1d" | "separable1d" => step1d(),
        "uniform1d" => uniform1d(),
        "margin1d" => margin1d(),
        "staircase1d" => staircase1d(),
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown oracle problem `{other}` (known: {})",
                NAMES.join(", ")
            )))
        }
    };
    match rho {
        Some(r) => OracleProblem::new(p.density().clone(), r),
        None => Ok(p),
    }
}

/// `h = 3` on the centre square `[1/4, 3/4]^2`, `1/3` elsewhere; `ρ = 1`.
pub fn square2d() -> OracleProblem {
    let mut values = vec![1.0 / 3.0; 16];
    for i in 1..3 {
        for j in 1..3 {
            values[i * 4 + j] = 3.0;
        }
    }
    let h = SyntheticDensity::regular(2, 4, values).expect("valid grid");
    OracleProblem::new(h, 1.0).expect("no cell at rho")
}

/// `h = 2` on `[0, 1/2)`, zero elsewhere; `ρ = 1`. The level set is
/// `[0, 1/2)` and normals never enter its complement.
pub fn step1d() -> OracleProblem {
    let h = SyntheticDensity::new(vec![vec![0.0, 0.5, 1.0]], vec![2.0, 0.0]).expect("valid grid");
    OracleProblem::new(h, 1.0).expect("no cell at rho")
}

/// Uniform normals with `ρ = 1/2`: everything is normal.
pub fn uniform1d() -> OracleProblem {
    OracleProblem::new(SyntheticDensity::uniform(1), 0.5).expect("no cell at rho")
}

/// `h = 4` on `[0, 0.2)`, `1/4` elsewhere; at `s = 1/2` this gives
/// `η ∈ {0.2, 0.8}`.
pub fn margin1d() -> OracleProblem {
    let h = SyntheticDensity::new(vec![vec![0.0, 0.2, 1.0]], vec![4.0, 0.25]).expect("valid grid");
    OracleProblem::new(h, 1.0).expect("no cell at rho")
}

/// `10^4` equal cells with `h = 1 + 1.6 (x - 1/2)` at their midpoints, so
/// `η` crosses 1/2 linearly in measure.
pub fn staircase1d() -> OracleProblem {
    let k = 10_000;
    let values: Vec<f64> = (0..k)
        .map(|i| 1.0 + 1.6 * ((i as f64 + 0.5) / k as f64 - 0.5))
        .collect();
    let h = SyntheticDensity::regular(1, k, values).expect("valid grid");
    OracleProblem::new(h, 1.0).expect("no cell at rho")
}
