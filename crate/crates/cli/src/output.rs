//! Artifact directory and CSV writers.

use std::path::{Path, PathBuf};

use ewd::datasets::format_lossless;
use ewd::{Error, Result};

pub const ENV_VAR: &str = "EWD_OUTPUT_DIR";
const DEFAULT_DIR: &str = "ewd-output";

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    /// Flag, then environment, then `./ewd-output`.
    pub fn resolve(flag: Option<PathBuf>) -> Self {
        let root = flag
            .or_else(|| std::env::var_os(ENV_VAR).filter(|v| !v.is_empty()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_DIR));
        Self { root }
    }

    fn path(&self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.root).map_err(|e| io_err(&self.root, e))?;
        Ok(self.root.join(name))
    }

    /// Writes a header plus rows; numbers are formatted losslessly by the caller.
    pub fn write_rows(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let path = self.path(name)?;
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
        w.write_record(header).map_err(|e| csv_err(&path, e))?;
        for row in rows {
            w.write_record(row).map_err(|e| csv_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
        println!("wrote {}", path.display());
        Ok(path)
    }

    /// A two-column `(x, y)` plot series.
    pub fn write_xy(&self, name: &str, points: &[(f64, f64)]) -> Result<PathBuf> {
        let rows: Vec<Vec<String>> = points.iter().map(|(x, y)| vec![format_lossless(*x), format_lossless(*y)]).collect();
        self.write_rows(name, &["x", "y"], &rows)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.path(name)?;
        std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        println!("wrote {}", path.display());
        Ok(path)
    }

    pub fn create(&self, name: &str) -> Result<(PathBuf, std::fs::File)> {
        let path = self.path(name)?;
        let file = std::fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        Ok((path, file))
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    io_err(path, std::io::Error::other(e.to_string()))
}

/// File-name-safe rendering of a tuning value.
pub fn tag(v: f64) -> String {
    format!("{v}").replace('-', "m")
}
