//! Closed-form calculators for the network sizing, approximation and
//! covering-number bounds, and the excess-risk / level-set rate exponents.
//!
//! Logarithms are natural except the explicit base-2 ones in `m` and `L*`.
//! Constants the theory leaves unspecified are caller-supplied.

use serde::{Deserialize, Serialize};

use crate::net::ClassSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizingInputs {
    pub n: u64,
    pub d: u32,
    pub alpha: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizingReport {
    pub inputs: SizingInputs,
    /// `N` after raising it to the admissibility floor.
    pub big_n: u64,
    /// `N` straight from the rate formula, before clamping.
    pub big_n_formula: u64,
    pub n_floor: f64,
    pub n_clamped: bool,
    pub m: u64,
    pub tau: f64,
    pub l_star: u64,
    pub w_star: u64,
    pub v_star: u64,
    /// `v*` exceeded `u64::MAX` and was saturated.
    pub v_star_saturated: bool,
    pub k_star: f64,
    pub rate_excess: f64,
    pub rate_levelset: f64,
    pub bound_excess: f64,
    pub bound_levelset: f64,
}

impl SizingReport {
    /// The class `F(L*, w*, v*, K*)` these sizes describe.
    pub fn class_spec(&self) -> ClassSpec {
        ClassSpec {
            max_depth: self.l_star as usize,
            max_width: self.w_star as usize,
            max_nonzero: self.v_star,
            max_abs: self.k_star,
            zero_tolerance: 0.0,
        }
    }
}

fn ceil_u64(x: f64) -> (u64, bool) {
    let c = x.ceil();
    if c >= u64::MAX as f64 {
        (u64::MAX, true)
    } else {
        (c.max(0.0) as u64, false)
    }
}

/// `⌈log₂ x⌉` for `x ≥ 1`.
fn ceil_log2(x: f64) -> u64 {
    let l = x.log2();
    let c = l.ceil();
    // guard exact powers of two against rounding just above an integer
    if (l - l.round()).abs() < 1e-12 {
        l.round() as u64
    } else {
        c as u64
    }
}

/// Depth `L* = 8 + (m+5)(1 + ⌈log₂ max{d, α}⌉)`.
pub fn l_star(m: u64, d: u32, alpha: f64) -> u64 {
    8 + (m + 5) * (1 + ceil_log2((d as f64).max(alpha)))
}

/// Width `w* = 6(d + ⌈α⌉)N`.
pub fn w_star(d: u32, alpha: f64, big_n: u64) -> u64 {
    6 * (d as u64 + alpha.ceil() as u64) * big_n
}

/// Nonzero count `v* = 141 (d+α+1)^{3+d} N (m+6)`, as a real.
pub fn v_star(d: u32, alpha: f64, big_n: u64, m: u64) -> f64 {
    141.0 * (d as f64 + alpha + 1.0).powi(3 + d as i32) * big_n as f64 * (m + 6) as f64
}

/// `m = ⌈(1 + α/d) log N / log 2⌉`, at least 1.
pub fn depth_parameter(big_n: u64, d: u32, alpha: f64) -> u64 {
    let m = ((1.0 + alpha / d as f64) * (big_n as f64).ln() / std::f64::consts::LN_2).ceil();
    (m as u64).max(1)
}

/// Network sizes, clamp scale and rate exponents for sample size `n`.
pub fn sizing(n: u64, d: u32, alpha: f64, q: f64, r: f64, s: f64) -> Result<SizingReport> {
    let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
    if n < 3 {
        return bad("n must be >= 3");
    }
    if d < 1 {
        return bad("d must be >= 1");
    }
    if !(alpha > 0.0 && alpha.is_finite()) || !(r > 0.0 && r.is_finite()) {
        return bad("alpha and r must be positive");
    }
    if !(q >= 0.0) {
        return bad("q must be >= 0");
    }
    if !(s >= 0.5 && s < 1.0) {
        return bad("s must lie in [1/2, 1)");
    }
    let nf = n as f64;
    let df = d as f64;
    let denom = df + alpha * (q + 2.0);
    let base = nf / nf.ln().powi(4);
    let (big_n_formula, _) = ceil_u64(base.powf(df / denom));
    let n_floor = (alpha + 1.0).powf(df).max((r + 1.0) * df.exp());
    let (floor_int, _) = ceil_u64(n_floor);
    let n_clamped = (big_n_formula as f64) < n_floor;
    let big_n = if n_clamped { floor_int } else { big_n_formula };

    let m = depth_parameter(big_n, d, alpha);
    let tau = s / ((1.0 - s) * nf);
    let (v, v_sat) = ceil_u64(v_star(d, alpha, big_n, m));
    let (rate_excess, rate_levelset) = rate_exponents(alpha, q, d)?;
    Ok(SizingReport {
        inputs: SizingInputs { n, d, alpha, q, r, s },
        big_n,
        big_n_formula,
        n_floor,
        n_clamped,
        m,
        tau,
        l_star: l_star(m, d, alpha),
        w_star: w_star(d, alpha, big_n),
        v_star: v,
        v_star_saturated: v_sat,
        k_star: 1.0,
        rate_excess,
        rate_levelset,
        bound_excess: rate_bound(n, rate_excess),
        bound_levelset: rate_bound(n, rate_levelset),
    })
}

/// `(2r+1)(1+d²+α²) 6^d N 2^{-m} + r 3^α N^{-α/d}`.
pub fn approx_error_bound(big_n: u64, m: u64, d: u32, alpha: f64, r: f64) -> f64 {
    let df = d as f64;
    let nf = big_n as f64;
    (2.0 * r + 1.0) * (1.0 + df * df + alpha * alpha) * 6f64.powf(df) * nf * 2f64.powf(-(m as f64))
        + r * 3f64.powf(alpha) * nf.powf(-alpha / df)
}

/// Log-covering bound `2L(v+1) log(ε⁻¹ (L+1)(w+1) max{K,1})` for `F(L, w, v, K)`.
pub fn covering_bound_general(eps: f64, depth: f64, width: f64, nonzero: f64, k: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidConfig("eps must be positive".into()));
    }
    Ok(2.0 * depth * (nonzero + 1.0) * ((depth + 1.0) * (width + 1.0) * k.max(1.0) / eps).ln())
}

/// Log-covering bound `c · m² N log((τε)⁻¹ m N)` for the clamped hypothesis space.
pub fn covering_bound_hypothesis(eps: f64, m: u64, big_n: u64, tau: f64, c_const: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidConfig("eps must lie in (0,1]".into()));
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidConfig("tau must lie in (0,1]".into()));
    }
    if !(c_const > 0.0) {
        return Err(Error::InvalidConfig("c_const must be positive".into()));
    }
    let (m, nf) = (m as f64, big_n as f64);
    Ok(c_const * m * m * nf * (m * nf / (tau * eps)).ln())
}

/// `(α(q+1)/(d+α(q+2)), αq/(d+α(q+2)))`: excess-risk and level-set exponents.
pub fn rate_exponents(alpha: f64, q: f64, d: u32) -> Result<(f64, f64)> {
    if !(alpha > 0.0) || !(q >= 0.0) || d < 1 {
        return Err(Error::InvalidConfig("need alpha > 0, q >= 0, d >= 1".into()));
    }
    let denom = d as f64 + alpha * (q + 2.0);
    Ok((alpha * (q + 1.0) / denom, alpha * q / denom))
}

/// `((log n)^4 / n)^exponent`.
pub fn rate_bound(n: u64, exponent: f64) -> f64 {
    let nf = n as f64;
    (nf.ln().powi(4) / nf).powf(exponent)
}
