//! Full-space oracle dumps.

use std::io::Write;

use dcs_core::config::ExperimentConfig;
use dcs_core::oracle::{enumerate_space, DEFAULT_ENUMERATION_LIMIT};

use crate::Result;

/// Writes `sequence,score` for every sequence in lexicographic order and
/// returns the number of data rows.
pub fn dump_oracle<W: Write>(cfg: &ExperimentConfig, mut out: W) -> Result<u64> {
    let vocab = cfg.vocabulary()?;
    let oracle = cfg.build_oracle::<f64>()?;
    let space = enumerate_space(oracle.as_ref(), DEFAULT_ENUMERATION_LIMIT)?;
    let mut rows = 0u64;
    writeln!(out, "sequence,score")?;
    for item in space {
        let (x, y) = item?;
        writeln!(out, "{},{}", vocab.render(&x), y)?;
        rows += 1;
    }
    out.flush()?;
    Ok(rows)
}
