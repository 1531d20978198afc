//! Run manifest written next to every run's outputs.

use std::fs;
use std::path::{Path, PathBuf};

use dcs_core::config::ExperimentConfig;
use serde::{Deserialize, Serialize};

use crate::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Files of one run, relative to the run directory.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct OutputLayout {
    pub rounds: String,
    pub timings: Option<String>,
    pub snapshots: Vec<String>,
    pub checkpoints: Vec<String>,
    pub reports: Vec<String>,
    pub plots: Vec<String>,
}

impl OutputLayout {
    /// Lists the files currently present under `dir`.
    pub fn scan(dir: &Path) -> Result<Self> {
        let list = |sub: &str| -> Result<Vec<String>> {
            let path = dir.join(sub);
            if !path.is_dir() {
                return Ok(Vec::new());
            }
            let mut names = Vec::new();
            for entry in fs::read_dir(&path)? {
                let entry = entry?;
                if entry.file_type()?.is_file() {
                    names.push(format!("{sub}/{}", entry.file_name().to_string_lossy()));
                }
            }
            names.sort();
            Ok(names)
        };
        Ok(Self {
            rounds: "rounds.csv".into(),
            timings: dir.join("timings.csv").is_file().then(|| "timings.csv".into()),
            snapshots: list("snapshots")?,
            checkpoints: list("checkpoints")?,
            reports: list("reports")?,
            plots: list("plots")?,
        })
    }

    pub fn files(&self) -> impl Iterator<Item = &String> {
        std::iter::once(&self.rounds)
            .chain(self.timings.iter())
            .chain(&self.snapshots)
            .chain(&self.checkpoints)
            .chain(&self.reports)
            .chain(&self.plots)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub code_version: String,
    pub seed: u64,
    pub started_at: String,
    pub finished_at: String,
    pub layout: OutputLayout,
    pub config: ExperimentConfig,
}

impl RunManifest {
    /// Errors on the first listed file that does not exist under `dir`.
    pub fn check_files(&self, dir: &Path) -> Result<()> {
        for f in self.layout.files() {
            if !dir.join(f).is_file() {
                return Err(CliError::MissingFile(f.clone()));
            }
        }
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scan_lists_sorted_files_and_check_detects_gaps() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("snapshots")).unwrap();
        fs::write(dir.path().join("rounds.csv"), "x\n").unwrap();
        fs::write(dir.path().join("snapshots/round_001.csv"), "").unwrap();
        fs::write(dir.path().join("snapshots/round_000.csv"), "").unwrap();
        let layout = OutputLayout::scan(dir.path()).unwrap();
        assert_eq!(layout.snapshots, ["snapshots/round_000.csv", "snapshots/round_001.csv"]);
        assert!(layout.timings.is_none());
        let m = RunManifest {
            config_hash: "h".into(),
            code_version: CODE_VERSION.into(),
            seed: 3,
            started_at: "a".into(),
            finished_at: "b".into(),
            layout,
            config: ExperimentConfig::default(),
        };
        m.check_files(dir.path()).unwrap();
        m.write(dir.path()).unwrap();
        assert_eq!(RunManifest::read(dir.path()).unwrap().seed, 3);
        fs::remove_file(dir.path().join("snapshots/round_001.csv")).unwrap();
        assert!(matches!(m.check_files(dir.path()), Err(CliError::MissingFile(_))));
    }
}
