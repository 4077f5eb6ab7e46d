use serde::{Deserialize, Serialize};

use super::{NetworkConfig, Parameters};

/// Bounds `(L, w, v, K)` of the constrained network class `F(L, w, v, K)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub max_depth: usize,
    pub max_width: usize,
    pub max_nonzero: u64,
    pub max_abs: f64,
    #[serde(default)]
    pub zero_tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamStats {
    /// Entries with `|value| > zero_tolerance`.
    pub nonzero_count: usize,
    pub max_abs: f64,
    /// `‖p‖_∞` over all layer widths including input and scalar output.
    pub max_width: usize,
}

pub fn param_stats(params: &Parameters, zero_tolerance: f64) -> ParamStats {
    let nonzero_count = params
        .values()
        .iter()
        .filter(|v| v.abs() > zero_tolerance)
        .count();
    ParamStats {
        nonzero_count,
        max_abs: params.max_abs(),
        max_width: params.widths().iter().copied().max().unwrap_or(0).max(1),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "bound", rename_all = "snake_case")]
pub enum Violation {
    Depth { actual: usize, limit: usize },
    Width { actual: usize, limit: usize },
    Nonzero { actual: usize, limit: u64 },
    MaxAbs { actual: f64, limit: f64 },
}

impl Violation {
    pub fn name(&self) -> &'static str {
        match self {
            Violation::Depth { .. } => "depth",
            Violation::Width { .. } => "width",
            Violation::Nonzero { .. } => "nonzero",
            Violation::MaxAbs { .. } => "max_abs",
        }
    }
}

/// Every bound of `spec` that the network violates; empty means member.
pub fn check_class_membership(
    params: &Parameters,
    config: &NetworkConfig,
    spec: &ClassSpec,
) -> Vec<Violation> {
    let stats = param_stats(params, spec.zero_tolerance);
    let mut out = Vec::new();
    if config.depth() > spec.max_depth {
        out.push(Violation::Depth {
            actual: config.depth(),
            limit: spec.max_depth,
        });
    }
    if stats.max_width > spec.max_width {
        out.push(Violation::Width {
            actual: stats.max_width,
            limit: spec.max_width,
        });
    }
    if stats.nonzero_count as u64 > spec.max_nonzero {
        out.push(Violation::Nonzero {
            actual: stats.nonzero_count,
            limit: spec.max_nonzero,
        });
    }
    if stats.max_abs > spec.max_abs {
        out.push(Violation::MaxAbs {
            actual: stats.max_abs,
            limit: spec.max_abs,
        });
    }
    out
}
