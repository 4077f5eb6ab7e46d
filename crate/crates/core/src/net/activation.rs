use serde::{Deserialize, Serialize};

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu { slope: f64 },
}

impl Activation {
    pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

    pub fn leaky() -> Self {
        Activation::LeakyRelu {
            slope: Self::DEFAULT_LEAKY_SLOPE,
        }
    }

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => relu(z),
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
        }
    }

    /// Derivative with the left value at the kink, so ReLU uses 0 at `z = 0`.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
        }
    }

    pub(crate) fn validate(self) -> Result<(), String> {
        match self {
            Activation::Relu => Ok(()),
            Activation::LeakyRelu { slope } if slope > 0.0 && slope < 1.0 => Ok(()),
            Activation::LeakyRelu { slope } => {
                Err(format!("leaky ReLU slope must lie in (0,1), got {slope}"))
            }
        }
    }
}

#[inline]
pub fn relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

/// Hard tanh `σ_τ`: 1 above `τ`, `x/τ` on `[-τ, τ)`, -1 below `-τ`.
#[inline]
pub fn hard_tanh(x: f64, tau: f64) -> f64 {
    if x >= tau {
        1.0
    } else if x >= -tau {
        x / tau
    } else {
        -1.0
    }
}

/// The same ramp written as a sum of four scaled ReLU units,
/// `σ(u) - σ(u - 1) - σ(-u) + σ(-u - 1)` with `u = x/τ`.
///
/// Matches [`hard_tanh`] bit for bit whenever `|x/τ| < 2^53`.
pub fn hard_tanh_relu(x: f64, tau: f64) -> f64 {
    let u = x / tau;
    relu(u) - relu(u - 1.0) - relu(-u) + relu(-u - 1.0)
}

/// Derivative of [`hard_tanh`], 0 at both kinks.
#[inline]
pub fn hard_tanh_derivative(x: f64, tau: f64) -> f64 {
    if x > -tau && x < tau {
        1.0 / tau
    } else {
        0.0
    }
}
