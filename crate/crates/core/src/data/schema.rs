use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Column {
    /// Scaled to `[0,1]` by `(x - min)/(max - min)` and clipped.
    Numeric { name: String, min: f64, max: f64 },
    /// One-hot encoded in the listed order.
    Categorical { name: String, categories: Vec<String> },
}

impl Column {
    pub fn name(&self) -> &str {
        match self {
            Column::Numeric { name, .. } | Column::Categorical { name, .. } => name,
        }
    }

    /// Number of encoded coordinates.
    pub fn width(&self) -> usize {
        match self {
            Column::Numeric { .. } => 1,
            Column::Categorical { categories, .. } => categories.len(),
        }
    }
}

/// Which raw label values count as anomalies; `"*"` means every value other
/// than the normal one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnomalyValues {
    Wildcard(String),
    List(Vec<String>),
}

impl Default for AnomalyValues {
    fn default() -> Self {
        AnomalyValues::Wildcard("*".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSpec {
    pub name: String,
    pub normal_value: String,
    #[serde(default)]
    pub anomaly_values: AnomalyValues,
}

impl LabelSpec {
    /// `+1` for the normal value, `-1` for an anomaly value, `None` for a
    /// value the spec does not know.
    pub fn encode(&self, raw: &str) -> Option<f64> {
        if raw == self.normal_value {
            return Some(1.0);
        }
        match &self.anomaly_values {
            AnomalyValues::Wildcard(_) => Some(-1.0),
            AnomalyValues::List(l) => l.iter().any(|v| v == raw).then_some(-1.0),
        }
    }
}

/// What to do with a categorical value that the schema does not list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownCategory {
    #[default]
    Reject,
    /// Encode the block as all zeros.
    ZeroBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<Column>,
    pub label: LabelSpec,
    #[serde(default)]
    pub unknown_category: UnknownCategory,
}

impl Schema {
    pub fn new(columns: Vec<Column>, label: LabelSpec) -> Result<Self> {
        let s = Self {
            columns,
            label,
            unknown_category: UnknownCategory::Reject,
        };
        s.validate()?;
        Ok(s)
    }

    /// All-numeric `[0,1]` schema with columns `x0, x1, ...` and a label column
    /// whose normal value is `normal`.
    pub fn unit_cube(d: usize) -> Self {
        Self {
            columns: (0..d)
                .map(|j| Column::Numeric {
                    name: format!("x{j}"),
                    min: 0.0,
                    max: 1.0,
                })
                .collect(),
            label: LabelSpec {
                name: "label".into(),
                normal_value: "normal".into(),
                anomaly_values: AnomalyValues::default(),
            },
            unknown_category: UnknownCategory::Reject,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::Schema("no feature columns".into()));
        }
        let mut names = HashSet::new();
        for c in &self.columns {
            if !names.insert(c.name()) || c.name() == self.label.name {
                return Err(Error::Schema(format!("duplicate column name `{}`", c.name())));
            }
            match c {
                Column::Numeric { name, min, max } => {
                    if !(min.is_finite() && max.is_finite() && min < max) {
                        return Err(Error::Schema(format!(
                            "numeric column `{name}` needs finite min < max, got [{min}, {max}]"
                        )));
                    }
                }
                Column::Categorical { name, categories } => {
                    if categories.is_empty() {
                        return Err(Error::Schema(format!("categorical column `{name}` has no categories")));
                    }
                    let distinct: HashSet<_> = categories.iter().collect();
                    if distinct.len() != categories.len() {
                        return Err(Error::Schema(format!("categorical column `{name}` repeats a category")));
                    }
                }
            }
        }
        match &self.label.anomaly_values {
            AnomalyValues::Wildcard(w) if w != "*" => Err(Error::Schema(format!(
                "anomaly_values must be a list or \"*\", got \"{w}\""
            ))),
            AnomalyValues::List(l) if l.iter().any(|v| *v == self.label.normal_value) => Err(Error::Schema(
                "the normal label value is also listed as an anomaly".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Encoded dimension: one per numeric column plus every category.
    pub fn encoded_dim(&self) -> usize {
        self.columns.iter().map(Column::width).sum()
    }

    /// Name of every encoded coordinate; categories appear as `column=value`.
    pub fn encoded_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.encoded_dim());
        for c in &self.columns {
            match c {
                Column::Numeric { name, .. } => out.push(name.clone()),
                Column::Categorical { name, categories } => {
                    out.extend(categories.iter().map(|v| format!("{name}={v}")))
                }
            }
        }
        out
    }

    /// `(offset, width)` of each categorical block in encoded coordinates.
    pub fn categorical_blocks(&self) -> Vec<(usize, usize)> {
        let mut offset = 0;
        let mut out = Vec::new();
        for c in &self.columns {
            if let Column::Categorical { categories, .. } = c {
                out.push((offset, categories.len()));
            }
            offset += c.width();
        }
        out
    }

    /// Encoded offsets of numeric columns.
    pub fn numeric_offsets(&self) -> Vec<usize> {
        let mut offset = 0;
        let mut out = Vec::new();
        for c in &self.columns {
            if let Column::Numeric { .. } = c {
                out.push(offset);
            }
            offset += c.width();
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let s: Schema = serde_json::from_str(&text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mixed() -> Schema {
        Schema::new(
            vec![
                Column::Numeric { name: "a".into(), min: 0.0, max: 10.0 },
                Column::Categorical { name: "c".into(), categories: vec!["x".into(), "y".into(), "z".into()] },
                Column::Numeric { name: "b".into(), min: -1.0, max: 1.0 },
            ],
            LabelSpec { name: "y".into(), normal_value: "ok".into(), anomaly_values: AnomalyValues::default() },
        )
        .unwrap()
    }

    #[test]
    fn layout() {
        let s = mixed();
        assert_eq!(s.encoded_dim(), 5);
        assert_eq!(s.categorical_blocks(), vec![(1, 3)]);
        assert_eq!(s.numeric_offsets(), vec![0, 4]);
        assert_eq!(s.encoded_names(), ["a", "c=x", "c=y", "c=z", "b"]);
    }

    #[test]
    fn rejects_bad_columns() {
        let label = mixed().label;
        let bad = |c: Column| Schema::new(vec![c], label.clone()).is_err();
        assert!(bad(Column::Numeric { name: "a".into(), min: 1.0, max: 1.0 }));
        assert!(bad(Column::Categorical { name: "a".into(), categories: vec![] }));
        assert!(bad(Column::Categorical { name: "a".into(), categories: vec!["u".into(), "u".into()] }));
        assert!(Schema::new(vec![], label).is_err());
    }

    #[test]
    fn json_form() {
        let text = r#"{
            "columns": [
                {"type": "numeric", "name": "a", "min": 0, "max": 2},
                {"type": "categorical", "name": "p", "categories": ["tcp", "udp"]}
            ],
            "label": {"name": "class", "normal_value": "normal", "anomaly_values": ["dos"]}
        }"#;
        let s: Schema = serde_json::from_str(text).unwrap();
        s.validate().unwrap();
        assert_eq!(s.encoded_dim(), 3);
        assert_eq!(s.label.encode("normal"), Some(1.0));
        assert_eq!(s.label.encode("dos"), Some(-1.0));
        assert_eq!(s.label.encode("probe"), None);
        let back: Schema = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);

        let wild: Schema = serde_json::from_str(
            r#"{"columns": [{"type": "numeric", "name": "a", "min": 0, "max": 1}],
                "label": {"name": "l", "normal_value": "n", "anomaly_values": "*"}}"#,
        )
        .unwrap();
        assert_eq!(wild.label.encode("anything"), Some(-1.0));
        let bad: Schema = serde_json::from_str(
            r#"{"columns": [{"type": "numeric", "name": "a", "min": 0, "max": 1}],
                "label": {"name": "l", "normal_value": "n", "anomaly_values": "all"}}"#,
        )
        .unwrap();
        assert!(bad.validate().is_err());
    }
}
