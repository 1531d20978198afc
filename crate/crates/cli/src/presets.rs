//! Named benchmark presets. Each preset is a base config plus a grid of
//! methods that differ only in their sampler settings or initial data.

use dcs_core::config::{DatasetKind, ExperimentConfig};
use dcs_core::deltacs::{DeltaMode, SearchMethod};

use crate::configfile::parse_config;
use crate::{CliError, Result};

pub const HARD_NK_TOML: &str = include_str!("../presets/hard-nk.toml");
pub const RNA_LIKE_TOY_TOML: &str = include_str!("../presets/rna-like-toy.toml");

pub const PRESET_NAMES: [&str; 5] = ["hard-nk", "rna-like-toy", "suffix-vs-deltacs", "delta-sweep", "percentile-sweep"];

/// Sequence length from which the delta sweep switches to the fine grid.
pub const LONG_SEQUENCE: usize = 100;

#[derive(Clone, Debug)]
pub struct Method {
    pub label: String,
    pub config: ExperimentConfig,
}

#[derive(Clone, Debug)]
pub struct Preset {
    pub name: String,
    pub methods: Vec<Method>,
}

impl Preset {
    /// Applies `f` to every method's config.
    pub fn map_configs(mut self, f: impl Fn(&mut ExperimentConfig)) -> Self {
        for m in &mut self.methods {
            f(&mut m.config);
        }
        self
    }

    pub fn method(&self, label: &str) -> Option<&Method> {
        self.methods.iter().find(|m| m.label == label)
    }
}

fn adaptive(base: &ExperimentConfig, delta_const: f64) -> ExperimentConfig {
    let mut c = base.clone();
    c.search.method = SearchMethod::DeltaCs;
    c.search.mode = DeltaMode::Adaptive;
    c.search.delta_const = delta_const;
    c
}

fn constant(base: &ExperimentConfig, delta: f64) -> ExperimentConfig {
    let mut c = base.clone();
    c.search.method = SearchMethod::DeltaCs;
    c.search.mode = DeltaMode::Constant;
    c.search.delta_const = delta;
    c
}

fn suffix(base: &ExperimentConfig, delta: f64) -> ExperimentConfig {
    let mut c = constant(base, delta);
    c.search.method = SearchMethod::Suffix;
    c
}

fn method(label: impl Into<String>, config: ExperimentConfig) -> Method {
    Method { label: label.into(), config }
}

/// δ_const grid of the sweep for sequences of length `length`.
pub fn delta_grid(length: usize) -> [f64; 5] {
    if length >= LONG_SEQUENCE {
        [0.01, 0.02, 0.03, 0.04, 0.05]
    } else {
        [0.1, 0.2, 0.3, 0.4, 0.5]
    }
}

pub const PERCENTILES: [f64; 3] = [50.0, 25.0, 10.0];
/// Random pool drawn for the percentile sweep.
pub const PERCENTILE_POOL: usize = 4096;

pub fn hard_nk_base() -> ExperimentConfig {
    parse_config(HARD_NK_TOML).expect("bundled preset parses")
}

pub fn rna_like_base() -> ExperimentConfig {
    parse_config(RNA_LIKE_TOY_TOML).expect("bundled preset parses")
}

pub fn preset(name: &str) -> Result<Preset> {
    let methods = match name {
        "hard-nk" => {
            let b = hard_nk_base();
            vec![method("delta-cs", adaptive(&b, 0.5)), method("delta=1", constant(&b, 1.0))]
        }
        "rna-like-toy" => {
            let b = rna_like_base();
            vec![method("delta-cs", adaptive(&b, 0.5)), method("delta=1", constant(&b, 1.0))]
        }
        "suffix-vs-deltacs" => {
            let b = hard_nk_base();
            vec![method("delta-cs", constant(&b, 0.5)), method("suffix", suffix(&b, 0.5))]
        }
        "delta-sweep" => {
            let b = hard_nk_base();
            let mut ms: Vec<Method> = delta_grid(b.oracle.length)
                .iter()
                .map(|&d| method(format!("delta-cs-{d}"), adaptive(&b, d)))
                .collect();
            ms.push(method("delta=1", constant(&b, 1.0)));
            ms
        }
        "percentile-sweep" => {
            let b = hard_nk_base();
            PERCENTILES
                .iter()
                .map(|&q| {
                    let mut c = adaptive(&b, 0.5);
                    c.dataset.kind = DatasetKind::Percentile;
                    c.dataset.percentile = q;
                    c.dataset.pool_size = Some(PERCENTILE_POOL);
                    method(format!("p{q}"), c)
                })
                .collect()
        }
        other => return Err(CliError::UnknownPreset(other.to_string())),
    };
    Ok(Preset { name: name.to_string(), methods })
}
