//! Plain-text parameter checkpoints.
//!
//! ```text
//! ndgrad-checkpoint v1
//! meta <key> <value>
//! tensor <name> <rows> <cols> <v0> <v1> ...
//! ```
//!
//! Values use the shortest representation that parses back to the same bits,
//! so a write/read cycle is lossless. Names and meta keys contain no whitespace.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::{GradError, ParamStore, Scalar, Tensor};

pub const HEADER: &str = "ndgrad-checkpoint v1";

#[derive(Clone, Debug, Default)]
pub struct Checkpoint<T> {
    pub meta: BTreeMap<String, String>,
    pub tensors: Vec<(String, Tensor<T>)>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn new() -> Self {
        Self {
            meta: BTreeMap::new(),
            tensors: Vec::new(),
        }
    }

    pub fn from_store(store: &ParamStore<T>) -> Self {
        let mut ckpt = Self::new();
        for p in store.params() {
            ckpt.tensors.push((p.name.clone(), p.value.clone()));
        }
        ckpt
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Copies every store parameter from the checkpoint, matching by name.
    pub fn load_into(&self, store: &mut ParamStore<T>) -> Result<(), GradError> {
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let name = store.name(id).to_string();
            let t = self
                .get(&name)
                .ok_or_else(|| GradError::Checkpoint(format!("missing parameter {name}")))?;
            store.assign(id, t.clone())?;
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), GradError> {
        writeln!(w, "{HEADER}")?;
        for (k, v) in &self.meta {
            check_token(k)?;
            writeln!(w, "meta {k} {v}")?;
        }
        for (name, t) in &self.tensors {
            check_token(name)?;
            write!(w, "tensor {name} {} {}", t.rows(), t.cols())?;
            for v in t.data() {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self, GradError> {
        let mut lines = r.lines();
        match lines.next() {
            Some(Ok(h)) if h.trim_end() == HEADER => {}
            _ => return Err(GradError::Checkpoint("missing or unsupported header".into())),
        }
        let mut ckpt = Self::new();
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |what: &str| GradError::Checkpoint(format!("line {}: {what}", n + 2));
            if let Some(rest) = line.strip_prefix("meta ") {
                let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                ckpt.meta.insert(k.to_string(), v.to_string());
            } else if let Some(rest) = line.strip_prefix("tensor ") {
                let mut parts = rest.split_ascii_whitespace();
                let name = parts.next().ok_or_else(|| bad("missing name"))?;
                let rows: usize = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad("bad rows"))?;
                let cols: usize = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad("bad cols"))?;
                let data = parts
                    .map(|s| s.parse::<T>().map_err(|_| bad("bad value")))
                    .collect::<Result<Vec<_>, _>>()?;
                ckpt.tensors
                    .push((name.to_string(), Tensor::from_vec(rows, cols, data)?));
            } else {
                return Err(bad("unknown record"));
            }
        }
        Ok(ckpt)
    }
}

fn check_token(s: &str) -> Result<(), GradError> {
    if s.is_empty() || s.chars().any(char::is_whitespace) {
        return Err(GradError::Checkpoint(format!("invalid name {s:?}")));
    }
    Ok(())
}
