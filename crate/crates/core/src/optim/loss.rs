use serde::{Deserialize, Serialize};

/// Margin losses `ℓ(t)` evaluated at `t = y · f(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Hinge,
    Logistic,
}

impl Loss {
    #[inline]
    pub fn value(self, t: f64) -> f64 {
        match self {
            Loss::Hinge => hinge(t),
            Loss::Logistic => logistic(t),
        }
    }

    #[inline]
    pub fn derivative(self, t: f64) -> f64 {
        match self {
            Loss::Hinge => hinge_deriv(t),
            Loss::Logistic => logistic_deriv(t),
        }
    }
}

/// `φ(t) = max{0, 1 - t}`.
#[inline]
pub fn hinge(t: f64) -> f64 {
    (1.0 - t).max(0.0)
}

/// -1 left of the kink, 0 at and right of it.
#[inline]
pub fn hinge_deriv(t: f64) -> f64 {
    if t < 1.0 {
        -1.0
    } else {
        0.0
    }
}

/// `log(1 + e^{-t})`, stable for large `|t|`.
#[inline]
pub fn logistic(t: f64) -> f64 {
    if t > 0.0 {
        (-t).exp().ln_1p()
    } else {
        -t + t.exp().ln_1p()
    }
}

/// `-1 / (1 + e^{t})`.
#[inline]
pub fn logistic_deriv(t: f64) -> f64 {
    if t > 0.0 {
        let e = (-t).exp();
        -e / (1.0 + e)
    } else {
        -1.0 / (1.0 + t.exp())
    }
}
