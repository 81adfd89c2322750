//! Dataset manifest: sampling rate, class frequencies and trial files.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

/// TOML manifest describing a recorded dataset.
///
/// ```toml
/// fs = 256.0
/// channels = 8
/// prestim = ["prestim/s1.csv"]
///
/// [[classes]]
/// label = "9.25Hz"
/// frequency = 9.25
///
/// [[trials]]
/// path = "trials/s1_c0_t0.csv"
/// class = 0
/// subject = "s1"
/// ```
#[derive(Debug, Clone, Deserialize)]
pub struct DatasetManifest {
    /// Sampling rate in Hz.
    pub fs: f64,
    /// Channel count shared by every trial file.
    pub channels: usize,
    pub classes: Vec<ClassEntry>,
    pub trials: Vec<TrialEntry>,
    /// Optional pre-stimulus segments for covariance estimation.
    #[serde(default)]
    pub prestim: Vec<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ClassEntry {
    pub label: String,
    /// Goal (stimulus) frequency in Hz.
    pub frequency: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct TrialEntry {
    pub path: PathBuf,
    /// Class index into `classes`.
    pub class: usize,
    #[serde(default)]
    pub subject: String,
}

impl DatasetManifest {
    /// Parse and validate a manifest; relative paths resolve against the
    /// manifest's own directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        let mut manifest: DatasetManifest =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;

        if manifest.fs <= 0.0 {
            bail!("manifest: sampling rate must be positive");
        }
        if manifest.channels == 0 {
            bail!("manifest: channel count must be positive");
        }
        if manifest.classes.is_empty() {
            bail!("manifest: no classes");
        }
        if manifest.trials.is_empty() {
            bail!("manifest: no trials");
        }
        for class in &manifest.classes {
            if class.frequency <= 0.0 {
                bail!(
                    "manifest: class {:?} has nonpositive frequency",
                    class.label
                );
            }
        }
        for trial in &manifest.trials {
            if trial.class >= manifest.classes.len() {
                bail!(
                    "manifest: trial {} references class {} of {}",
                    trial.path.display(),
                    trial.class,
                    manifest.classes.len()
                );
            }
        }

        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for trial in &mut manifest.trials {
            if trial.path.is_relative() {
                trial.path = base.join(&trial.path);
            }
        }
        for seg in &mut manifest.prestim {
            if seg.is_relative() {
                *seg = base.join(&*seg);
            }
        }
        Ok(manifest)
    }
}
