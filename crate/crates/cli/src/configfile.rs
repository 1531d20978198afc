//! TOML config loading and canonical hashing.

use std::fs;
use std::path::Path;

use dcs_core::config::ExperimentConfig;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::{CliError, Result};

/// Keys that must be present in every config file, as dotted paths.
pub const REQUIRED_KEYS: [&str; 3] = ["schema_version", "oracle.kind", "dataset.kind"];

fn has_key(table: &toml::Table, dotted: &str) -> bool {
    let (parents, leaf) = match dotted.rsplit_once('.') {
        Some((p, l)) => (p.split('.').collect::<Vec<_>>(), l),
        None => (Vec::new(), dotted),
    };
    let mut current = table;
    for part in parents {
        match current.get(part) {
            Some(toml::Value::Table(t)) => current = t,
            _ => return false,
        }
    }
    current.contains_key(leaf)
}

/// Parses and validates config text. Missing required keys are reported by
/// name before any other schema error.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    for key in REQUIRED_KEYS {
        if !has_key(&table, key) {
            return Err(CliError::MissingKey(key.to_string()));
        }
    }
    let cfg = ExperimentConfig::deserialize(toml::Value::Table(table))
        .map_err(|e| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads a config file. Relative data paths resolve against the file's
/// directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    for p in [&mut cfg.oracle.path, &mut cfg.dataset.path].into_iter().flatten() {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(cfg)
}

/// Effective config as JSON with object keys sorted.
pub fn canonical_json(cfg: &ExperimentConfig) -> Result<String> {
    // serde_json's default map is ordered by key.
    let value = serde_json::to_value(cfg)?;
    Ok(serde_json::to_string(&value)?)
}

/// Hex SHA-256 of the canonical JSON form.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    Ok(hex::encode(Sha256::digest(canonical_json(cfg)?.as_bytes())))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "schema_version = 1\n[oracle]\nkind = \"nk\"\n[dataset]\nkind = \"random\"\nsize = 16\n";

    #[test]
    fn missing_keys_are_named() {
        for (text, key) in [
            ("[oracle]\nkind = \"nk\"\n[dataset]\nkind = \"random\"\n", "schema_version"),
            ("schema_version = 1\n[dataset]\nkind = \"random\"\n", "oracle.kind"),
            ("schema_version = 1\n[oracle]\nkind = \"nk\"\n[dataset]\nsize = 3\n", "dataset.kind"),
        ] {
            match parse_config(text) {
                Err(CliError::MissingKey(k)) => assert_eq!(k, key),
                other => panic!("expected missing {key}, got {other:?}"),
            }
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{MINIMAL}bogus = 3\n");
        assert!(matches!(parse_config(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn hash_ignores_key_order_and_formatting() {
        let a = parse_config(MINIMAL).unwrap();
        let b = parse_config("schema_version=1\n[dataset]\nsize=16\nkind=\"random\"\n[oracle]\nkind=\"nk\"\n").unwrap();
        assert_eq!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        let c = parse_config(&MINIMAL.replace("16", "17")).unwrap();
        assert_ne!(config_hash(&a).unwrap(), config_hash(&c).unwrap());
        assert_eq!(config_hash(&a).unwrap().len(), 64);
    }
}
