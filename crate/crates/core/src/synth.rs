//! Synthetic anomalies drawn from the uniform reference measure, plus the
//! rule for how many to draw.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Column, Schema};
use crate::{rng, Error, Matrix, Result};

/// Where synthetic anomalies live.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingSpace {
    /// Uniform numeric coordinates and a uniformly chosen valid one-hot
    /// vector per categorical block.
    #[default]
    Support,
    /// Every coordinate uniform on `[0,1]`, one-hot structure ignored.
    Ambient,
}

/// Number of synthetic anomalies `n'` per normal count `n`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AnomalyRatioPolicy {
    /// `n' = n`.
    #[default]
    Equal,
    /// `n' = ⌈(1 - s)/s · n⌉`, the smallest admissible value.
    LowerBound,
    /// `n' = ⌈k n⌉`.
    Multiple { k: f64 },
}

pub fn anomaly_count(n: usize, s: f64, policy: AnomalyRatioPolicy) -> Result<usize> {
    if n == 0 {
        return Err(Error::InvalidConfig("need at least one normal sample".into()));
    }
    let count = match policy {
        AnomalyRatioPolicy::Equal => n,
        AnomalyRatioPolicy::LowerBound => {
            if !(0.5..1.0).contains(&s) {
                return Err(Error::InvalidConfig(format!(
                    "lower_bound needs s in [1/2, 1), got {s}"
                )));
            }
            let c = ((1.0 - s) / s * n as f64 - 1e-9).ceil() as usize;
            debug_assert!(c <= n);
            c
        }
        AnomalyRatioPolicy::Multiple { k } => {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::InvalidConfig(format!("multiple needs k > 0, got {k}")));
            }
            (k * n as f64 - 1e-9).ceil() as usize
        }
    };
    Ok(count.max(1))
}

pub fn sample_uniform_ambient(d: usize, count: usize, seed: u64) -> Result<Matrix> {
    if d == 0 || count == 0 {
        return Err(Error::InvalidConfig(format!(
            "ambient sampler needs d >= 1 and n' >= 1, got d = {d}, n' = {count}"
        )));
    }
    let mut r = rng::seeded(seed);
    let data = (0..d * count).map(|_| r.gen::<f64>()).collect();
    Matrix::from_vec(count, d, data)
}

pub fn sample_uniform_support(schema: &Schema, count: usize, seed: u64) -> Result<Matrix> {
    if schema.columns.is_empty() {
        return Err(Error::Schema("no feature columns to sample".into()));
    }
    if count == 0 {
        return Err(Error::InvalidConfig("n' must be at least 1".into()));
    }
    let mut r = rng::seeded(seed);
    let mut out = Matrix::zeros(count, schema.encoded_dim());
    for i in 0..count {
        let row = out.row_mut(i);
        let mut offset = 0;
        for col in &schema.columns {
            match col {
                Column::Numeric { .. } => row[offset] = r.gen(),
                Column::Categorical { categories, .. } => {
                    row[offset + r.gen_range(0..categories.len())] = 1.0;
                }
            }
            offset += col.width();
        }
    }
    Ok(out)
}

pub fn sample(space: SamplingSpace, schema: &Schema, count: usize, seed: u64) -> Result<Matrix> {
    match space {
        SamplingSpace::Support => sample_uniform_support(schema, count, seed),
        SamplingSpace::Ambient => sample_uniform_ambient(schema.encoded_dim(), count, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{AnomalyValues, LabelSpec};
    use proptest::prelude::*;

    fn mixed() -> Schema {
        Schema::new(
            vec![
                Column::Numeric { name: "a".into(), min: 0.0, max: 1.0 },
                Column::Categorical { name: "c".into(), categories: vec!["x".into(), "y".into(), "z".into()] },
                Column::Numeric { name: "b".into(), min: 0.0, max: 1.0 },
            ],
            LabelSpec { name: "l".into(), normal_value: "n".into(), anomaly_values: AnomalyValues::default() },
        )
        .unwrap()
    }

    #[test]
    fn counts() {
        use AnomalyRatioPolicy::*;
        assert_eq!(anomaly_count(100, 0.5, Equal).unwrap(), 100);
        assert_eq!(anomaly_count(100, 2.0 / 3.0, LowerBound).unwrap(), 50);
        assert_eq!(anomaly_count(100, 0.5, Multiple { k: 30.0 }).unwrap(), 3000);
        assert_eq!(anomaly_count(3, 0.5, Multiple { k: 0.5 }).unwrap(), 2);
        assert!(anomaly_count(100, 0.4, LowerBound).is_err());
        assert!(anomaly_count(100, 1.0, LowerBound).is_err());
        assert!(anomaly_count(0, 0.5, Equal).is_err());
        assert!(anomaly_count(5, 0.5, Multiple { k: 0.0 }).is_err());
    }

    #[test]
    fn support_blocks_are_one_hot() {
        let m = sample_uniform_support(&mixed(), 2000, 9).unwrap();
        for row in m.iter_rows() {
            let block = &row[1..4];
            assert_eq!(block.iter().sum::<f64>(), 1.0);
            assert!(block.iter().all(|&v| v == 0.0 || v == 1.0));
            assert!((0.0..1.0).contains(&row[0]) && (0.0..1.0).contains(&row[4]));
        }
        assert_eq!(m, sample_uniform_support(&mixed(), 2000, 9).unwrap());
    }

    #[test]
    fn numeric_means() {
        let n = 10_000;
        let m = sample_uniform_support(&Schema::unit_cube(4), n, 2).unwrap();
        let bound = 4.0 / 12f64.sqrt() / (n as f64).sqrt();
        for mean in m.column_means() {
            assert!((mean - 0.5).abs() < bound, "{mean}");
        }
        let a = sample_uniform_ambient(5, n, 2).unwrap();
        for mean in a.column_means() {
            assert!((mean - 0.5).abs() < bound, "{mean}");
        }
    }

    #[test]
    fn ambient_ignores_blocks() {
        let m = sample(SamplingSpace::Ambient, &mixed(), 100, 1).unwrap();
        assert_eq!(m.cols(), 5);
        assert!(m.as_slice().iter().all(|&v| v > 0.0 && v < 1.0));
        let one = sample_uniform_ambient(1, 1, 77).unwrap();
        assert_eq!(one, sample_uniform_ambient(1, 1, 77).unwrap());
        assert!(sample_uniform_ambient(0, 1, 1).is_err());
    }

    proptest! {
        #[test]
        fn lower_bound_never_exceeds_equal(n in 1usize..100_000, s in 0.5f64..0.999) {
            let lb = anomaly_count(n, s, AnomalyRatioPolicy::LowerBound).unwrap();
            prop_assert!(lb <= n);
            prop_assert!(lb as f64 >= (1.0 - s) / s * n as f64 - 1e-6);
        }
    }
}
