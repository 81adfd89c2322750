//! Trial file I/O, CSV emission and run metadata records.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;

/// Load a trial: CSV with rows = samples and columns = channels. Ragged
/// rows and non-numeric cells are rejected with their location.
pub fn load_trial(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading trial file {}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = 0usize;
    for (line_idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (col_idx, cell) in line.split(',').enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| {
                anyhow::anyhow!(
                    "{}: parse error at line {}, column {}: {:?} is not a number",
                    path.display(),
                    line_idx + 1,
                    col_idx + 1,
                    cell.trim()
                )
            })?;
            if !value.is_finite() {
                bail!(
                    "{}: non-finite value at line {}, column {}",
                    path.display(),
                    line_idx + 1,
                    col_idx + 1
                );
            }
            row.push(value);
        }
        if rows.is_empty() {
            width = row.len();
        } else if row.len() != width {
            bail!(
                "{}: ragged row at line {}: {} cells, expected {}",
                path.display(),
                line_idx + 1,
                row.len(),
                width
            );
        }
        rows.push(row);
    }
    if rows.is_empty() || width == 0 {
        bail!("{}: empty trial file", path.display());
    }
    let n = rows.len();
    Ok(DMatrix::from_fn(n, width, |i, j| rows[i][j]))
}

/// Write a trial as CSV with full round-trip precision.
pub fn write_trial(path: &Path, trial: &DMatrix<f64>) -> Result<()> {
    let mut text = String::new();
    for i in 0..trial.nrows() {
        for j in 0..trial.ncols() {
            if j > 0 {
                text.push(',');
            }
            let _ = write!(text, "{}", trial[(i, j)]);
        }
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("writing trial file {}", path.display()))
}

/// Format a float for CSV output (shortest round-trip representation).
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Write a CSV table with a fixed header; columns never reorder.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut text = String::new();
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Run metadata written next to each result file: the full configuration
/// echo, seed, tool version and wall time, enough to reproduce the run.
pub struct RunMetadata {
    pub mode: String,
    pub seed: u64,
    pub config: Vec<(String, String)>,
    pub wall_secs: f64,
}

/// Path of the metadata record for an output file.
pub fn meta_path(out: &Path) -> PathBuf {
    let mut os = out.as_os_str().to_owned();
    os.push(".meta");
    PathBuf::from(os)
}

pub fn write_metadata(out: &Path, meta: &RunMetadata) -> Result<()> {
    let mut text = String::new();
    let _ = writeln!(text, "mode = {:?}", meta.mode);
    let _ = writeln!(text, "seed = {}", meta.seed);
    let _ = writeln!(text, "version = {:?}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(text, "wall_secs = {}", meta.wall_secs);
    let _ = writeln!(text, "\n[config]");
    for (key, value) in &meta.config {
        let _ = writeln!(text, "{key} = {value}");
    }
    fs::write(meta_path(out), text).context("writing metadata record")
}
