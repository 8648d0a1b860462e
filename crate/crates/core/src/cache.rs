//! JSON cache of critical values keyed by `(k, p, alpha, reps, master seed)`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::critical::{critical_value, CriticalValue};
use crate::error::Result;
use crate::sim::SimConfig;
use crate::stats::NormOrder;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CriticalCache {
    entries: BTreeMap<String, CriticalValue>,
}

impl CriticalCache {
    /// Loads a cache file; a missing file yields an empty cache.
    pub fn load(path: &Path) -> Result<Self> {
        match std::fs::read_to_string(path) {
            Ok(text) => Ok(serde_json::from_str(&text)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(e.into()),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Closed-form values ignore the simulation settings, so they key with zeros.
    pub fn key(k: usize, p: NormOrder, alpha: f64, cfg: &SimConfig) -> String {
        let (reps, seed) = if p.is_infinite() { (0, 0) } else { (cfg.reps, cfg.seed) };
        format!("k={k};p={p};alpha={alpha};reps={reps};seed={seed}")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, k: usize, p: NormOrder, alpha: f64, cfg: &SimConfig) -> Option<&CriticalValue> {
        self.entries.get(&Self::key(k, p, alpha, cfg))
    }

    /// Returns the cached value or computes and stores it. The flag reports a cache hit.
    pub fn get_or_compute(&mut self, k: usize, p: NormOrder, alpha: f64, cfg: &SimConfig) -> Result<(CriticalValue, bool)> {
        let key = Self::key(k, p, alpha, cfg);
        if let Some(c) = self.entries.get(&key) {
            return Ok((c.clone(), true));
        }
        let c = critical_value(k, alpha, p, cfg)?;
        self.entries.insert(key, c.clone());
        Ok((c, false))
    }
}
