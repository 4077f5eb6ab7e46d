//! Classification-based unsupervised anomaly detection.
//!
//! Normal samples are contrasted against synthetic anomalies drawn from a
//! known reference measure (uniform on the encoded domain), and a small ReLU
//! network is fitted by weighted hinge-loss empirical risk minimization.
//! The crate also carries a ground-truth world made of piecewise-constant
//! densities, where Bayes risk, excess risk and level-set error are computed
//! exactly, plus closed-form calculators for the sizing and rate formulas
//! that accompany the method.
//!
//! Modules:
//!
//! - [`net`]: feed-forward network, hard-tanh clamp, gradients, class checks
//! - [`optim`]: losses, Adam, the ERM training loop
//! - [`synth`]: synthetic-anomaly samplers and the `n'` sizing policy
//! - [`data`]: schema-driven CSV ingestion and encoding to `[0,1]^d`
//! - [`oracle`]: piecewise-constant densities with exact risks
//! - [`theory`]: sizing, approximation, covering and rate calculators
//! - [`eval`]: AUPR, AUROC, threshold calibration, aggregation

pub mod data;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod net;
pub mod optim;
pub mod oracle;
pub mod rng;
pub mod synth;
pub mod theory;

pub use error::{Error, Result};
pub use matrix::Matrix;

/// A real-valued decision function on `[0,1]^d`; `score > 0` means normal.
pub trait Scorer: Sync {
    fn score(&self, x: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64 + Sync> Scorer for F {
    fn score(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

impl Scorer for net::Network {
    fn score(&self, x: &[f64]) -> f64 {
        net::Network::score(self, x)
    }
}

/// `sign` with `sign(0) = +1`, so a zero score is classified normal.
#[inline]
pub fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}
