//! Single-run driver: output directory, persisted rounds, plots, manifest.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use dcs_core::activeloop::RoundLog;
use dcs_core::config::ExperimentConfig;
use dcs_core::Run;

use crate::configfile::config_hash;
use crate::manifest::{OutputLayout, RunManifest, CODE_VERSION};
use crate::plot::{render, RoundsTable};
use crate::Result;

pub const OUT_DIR_ENV: &str = "DCS_OUT_DIR";
pub const DEFAULT_OUT_ROOT: &str = "runs";

/// Output root: explicit flag, then `DCS_OUT_DIR`, then `runs`.
pub fn output_root(flag: Option<&Path>) -> PathBuf {
    match flag {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUT_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_ROOT)),
    }
}

/// Creates a fresh `<root>/<timestamp>-<hash8>` directory.
pub fn fresh_run_dir(root: &Path, hash: &str) -> Result<PathBuf> {
    fresh_dir(root, &hash[..8.min(hash.len())])
}

/// Creates a fresh `<root>/<timestamp>-<suffix>` directory, adding a counter
/// when the name is taken.
pub fn fresh_dir(root: &Path, suffix: &str) -> Result<PathBuf> {
    fs::create_dir_all(root)?;
    let stamp = Utc::now().format("%Y%m%dT%H%M%SZ");
    let base = format!("{stamp}-{suffix}");
    let mut candidate = root.join(&base);
    let mut n = 1;
    loop {
        match fs::create_dir(&candidate) {
            Ok(()) => return Ok(candidate),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                candidate = root.join(format!("{base}-{n}"));
                n += 1;
            }
            Err(e) => return Err(e.into()),
        }
    }
}

#[derive(Debug)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub logs: Vec<RoundLog<f64>>,
}

/// Runs `cfg` in a new timestamped directory under `root`.
pub fn execute(cfg: &ExperimentConfig, root: &Path) -> Result<RunSummary> {
    let hash = config_hash(cfg)?;
    let dir = fresh_run_dir(root, &hash)?;
    execute_in(cfg, &dir)
}

/// Runs `cfg` with outputs in `dir`. Rows are flushed per round, so a failed
/// run leaves its completed rounds on disk.
pub fn execute_in(cfg: &ExperimentConfig, dir: &Path) -> Result<RunSummary> {
    let hash = config_hash(cfg)?;
    let started_at = Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true);
    fs::create_dir_all(dir.join("plots"))?;
    let mut exp = Run::new(cfg.clone())?;
    let logs = exp.run_persisted(dir)?;
    if !logs.is_empty() {
        let table = RoundsTable::read(&dir.join("rounds.csv"))?;
        render(std::slice::from_ref(&table), &dir.join("plots"))?;
    }
    let manifest = RunManifest {
        config_hash: hash,
        code_version: CODE_VERSION.to_string(),
        seed: cfg.seed,
        started_at,
        finished_at: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
        layout: OutputLayout::scan(dir)?,
        config: cfg.clone(),
    };
    manifest.write(dir)?;
    manifest.check_files(dir)?;
    log::info!("run written to {}", dir.display());
    Ok(RunSummary { dir: dir.to_path_buf(), manifest, logs })
}
