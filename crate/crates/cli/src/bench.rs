//! Method-by-seed benchmark grids with summary and paired tables.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dcs_core::activeloop::RoundLog;
use rayon::prelude::*;

use crate::presets::Preset;
use crate::run::{execute_in, fresh_dir};
use crate::{CliError, Result};

/// Final-round metrics of one (method, seed) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub method: String,
    pub seed: u64,
    pub rounds: usize,
    pub topk_max: f64,
    pub topk_median: f64,
    pub topk_mean: f64,
    pub diversity: f64,
    pub novelty: f64,
}

impl CellResult {
    fn from_log(method: &str, seed: u64, log: &RoundLog<f64>) -> Self {
        Self {
            method: method.to_string(),
            seed,
            rounds: log.round,
            topk_max: log.topk.max,
            topk_median: log.topk.median,
            topk_mean: log.topk.mean,
            diversity: log.topk.diversity,
            novelty: log.topk.novelty,
        }
    }
}

/// Mean and sample standard deviation; the deviation of one value is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub seeds: usize,
    pub topk_mean: (f64, f64),
    pub topk_max: (f64, f64),
    pub diversity: (f64, f64),
    pub novelty: (f64, f64),
}

/// Seed-matched final Top-K means of two methods.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedRow {
    pub seed: u64,
    pub first: f64,
    pub second: f64,
}

impl PairedRow {
    pub fn difference(&self) -> f64 {
        self.first - self.second
    }
}

#[derive(Clone, Debug)]
pub struct BenchResult {
    pub dir: PathBuf,
    pub cells: Vec<CellResult>,
    pub summary: Vec<SummaryRow>,
    /// Method labels and rows when the preset compares exactly two methods.
    pub paired: Option<(String, String, Vec<PairedRow>)>,
}

impl BenchResult {
    /// Seeds on which the first method's final Top-K mean is strictly higher.
    pub fn paired_wins(&self) -> Option<usize> {
        self.paired
            .as_ref()
            .map(|(_, _, rows)| rows.iter().filter(|r| r.difference() > 0.0).count())
    }
}

fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

/// Runs every (method, seed) cell of `preset` with `jobs` worker threads and
/// writes the tables under a fresh directory of `root`.
pub fn run_bench(preset: &Preset, seeds: &[u64], jobs: usize, root: &Path) -> Result<BenchResult> {
    if seeds.is_empty() || preset.methods.is_empty() {
        return Err(CliError::Config("bench needs at least one seed and one method".into()));
    }
    let dir = fresh_dir(root, &format!("bench-{}", preset.name))?;
    run_bench_in(preset, seeds, jobs, &dir)
}

pub fn run_bench_in(preset: &Preset, seeds: &[u64], jobs: usize, dir: &Path) -> Result<BenchResult> {
    if seeds.is_empty() || preset.methods.is_empty() {
        return Err(CliError::Config("bench needs at least one seed and one method".into()));
    }
    let cells: Vec<(usize, u64)> = (0..preset.methods.len())
        .flat_map(|m| seeds.iter().map(move |&s| (m, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let results: Vec<Result<CellResult>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(m, seed)| {
                let method = &preset.methods[m];
                let mut cfg = method.config.clone();
                cfg.seed = seed;
                let cell_dir = dir.join(slug(&method.label)).join(format!("seed_{seed}"));
                let summary = execute_in(&cfg, &cell_dir)?;
                let last = summary
                    .logs
                    .last()
                    .ok_or_else(|| CliError::Config("bench needs at least one round".into()))?;
                log::info!("{} seed {seed}: top-k mean {:.4}", method.label, last.topk.mean);
                Ok(CellResult::from_log(&method.label, seed, last))
            })
            .collect()
    });
    let cells = results.into_iter().collect::<Result<Vec<_>>>()?;
    let summary = summarize(preset, &cells);
    let paired = match preset.methods.as_slice() {
        [a, b] => Some((a.label.clone(), b.label.clone(), pair(&cells, &a.label, &b.label))),
        _ => None,
    };
    let result = BenchResult { dir: dir.to_path_buf(), cells, summary, paired };
    write_tables(&result)?;
    Ok(result)
}

fn summarize(preset: &Preset, cells: &[CellResult]) -> Vec<SummaryRow> {
    preset
        .methods
        .iter()
        .map(|m| {
            let mine: Vec<&CellResult> = cells.iter().filter(|c| c.method == m.label).collect();
            let stat = |f: fn(&CellResult) -> f64| mean_std(&mine.iter().map(|c| f(c)).collect::<Vec<_>>());
            SummaryRow {
                method: m.label.clone(),
                seeds: mine.len(),
                topk_mean: stat(|c| c.topk_mean),
                topk_max: stat(|c| c.topk_max),
                diversity: stat(|c| c.diversity),
                novelty: stat(|c| c.novelty),
            }
        })
        .collect()
}

fn pair(cells: &[CellResult], a: &str, b: &str) -> Vec<PairedRow> {
    cells
        .iter()
        .filter(|c| c.method == a)
        .filter_map(|ca| {
            cells
                .iter()
                .find(|cb| cb.method == b && cb.seed == ca.seed)
                .map(|cb| PairedRow { seed: ca.seed, first: ca.topk_mean, second: cb.topk_mean })
        })
        .collect()
}

/// Plain-text mean ± std table.
pub fn format_summary(rows: &[SummaryRow]) -> String {
    let width = rows.iter().map(|r| r.method.len()).max().unwrap_or(6).max(6);
    let mut out = format!(
        "{:<width$}  {:>5}  {:>17}  {:>17}  {:>17}  {:>17}\n",
        "method", "seeds", "topk_mean", "topk_max", "diversity", "novelty"
    );
    for r in rows {
        let ms = |(m, s): (f64, f64)| format!("{m:.4} ± {s:.4}");
        let _ = writeln!(
            out,
            "{:<width$}  {:>5}  {:>17}  {:>17}  {:>17}  {:>17}",
            r.method,
            r.seeds,
            ms(r.topk_mean),
            ms(r.topk_max),
            ms(r.diversity),
            ms(r.novelty)
        );
    }
    out
}

pub fn format_paired(a: &str, b: &str, rows: &[PairedRow]) -> String {
    let mut out = format!("{:>6}  {:>12}  {:>12}  {:>10}\n", "seed", a, b, "difference");
    for r in rows {
        let _ = writeln!(out, "{:>6}  {:>12.4}  {:>12.4}  {:>+10.4}", r.seed, r.first, r.second, r.difference());
    }
    let wins = rows.iter().filter(|r| r.difference() > 0.0).count();
    let _ = writeln!(out, "{a} higher on {wins} of {} seeds", rows.len());
    out
}

fn write_tables(result: &BenchResult) -> Result<()> {
    let mut w = csv::Writer::from_path(result.dir.join("bench.csv"))?;
    w.write_record(["method", "seed", "rounds", "topk_max", "topk_median", "topk_mean", "diversity", "novelty"])?;
    for c in &result.cells {
        w.write_record([
            c.method.clone(),
            c.seed.to_string(),
            c.rounds.to_string(),
            c.topk_max.to_string(),
            c.topk_median.to_string(),
            c.topk_mean.to_string(),
            c.diversity.to_string(),
            c.novelty.to_string(),
        ])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(result.dir.join("summary.csv"))?;
    w.write_record([
        "method", "seeds", "topk_mean", "topk_mean_std", "topk_max", "topk_max_std", "diversity", "diversity_std",
        "novelty", "novelty_std",
    ])?;
    for r in &result.summary {
        let mut rec = vec![r.method.clone(), r.seeds.to_string()];
        for (m, s) in [r.topk_mean, r.topk_max, r.diversity, r.novelty] {
            rec.push(m.to_string());
            rec.push(s.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    let mut text = format_summary(&result.summary);
    if let Some((a, b, rows)) = &result.paired {
        let mut w = csv::Writer::from_path(result.dir.join("paired.csv"))?;
        w.write_record(["seed", a.as_str(), b.as_str(), "difference"])?;
        for r in rows {
            w.write_record([r.seed.to_string(), r.first.to_string(), r.second.to_string(), r.difference().to_string()])?;
        }
        w.flush()?;
        text.push('\n');
        text.push_str(&format_paired(a, b, rows));
    }
    fs::write(result.dir.join("summary.txt"), text)?;
    Ok(())
}
