use std::path::{Path, PathBuf};

use serde::Serialize;
use tcad_core::eval::{self, CurvePoint, MeanStd};

use crate::CliError;

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Output directory with `curves/` and `checkpoints/` underneath.
pub struct OutDir {
    pub root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        for sub in ["", "curves", "checkpoints"] {
            let p = root.join(sub);
            std::fs::create_dir_all(&p).map_err(|e| io_error(&p, e))?;
        }
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn curve(&self, name: &str) -> PathBuf {
        self.root.join("curves").join(name)
    }

    pub fn checkpoint(&self, name: &str) -> PathBuf {
        self.root.join("checkpoints").join(name)
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report.json")
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_error(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

pub fn write_curve(path: &Path, points: &[CurvePoint], header: [&str; 3]) -> Result<(), CliError> {
    let file = std::fs::File::create(path).map_err(|e| io_error(path, e))?;
    eval::write_curve_csv(points, header, std::io::BufWriter::new(file)).map_err(|e| io_error(path, e))
}

/// Rows of pre-formatted cells under `header`.
pub fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    w.write_record(header).map_err(|e| io_error(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

/// Mean, sample std and median of one metric over runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub median: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let MeanStd { mean, std } = MeanStd::of(values);
        Self { mean, std, median: eval::median(values) }
    }
}
