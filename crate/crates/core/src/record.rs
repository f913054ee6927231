//! Trajectory records produced by optimizer runs and searches.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// Names of the series stored in [`RunRecord::series`].
pub mod series {
    /// Objective value at the iterate before each update.
    pub const LOSS: &str = "loss";
    /// Dual norm of the stochastic gradient used by each update.
    pub const GRAD_DUAL_NORM: &str = "grad_dual_norm";
    pub const STEP: &str = "step";
    /// Mean natural-log entropy of the simplex blocks after each update.
    pub const ENTROPY: &str = "entropy";
    pub const TRAIN_LOSS: &str = "train_loss";
    pub const VAL_LOSS: &str = "val_loss";
    pub const GRAD_NORM_W: &str = "grad_norm_w";
    pub const GRAD_NORM_THETA: &str = "grad_norm_theta";
}

/// Per-iteration (or per-epoch) trajectory of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub seed: u64,
    /// Block updated at each iteration; empty for epoch-based searches.
    pub blocks: Vec<u32>,
    /// Hash of the full iterate after each iteration or epoch.
    pub iterate_hash: Vec<u64>,
    pub series: BTreeMap<String, Vec<f64>>,
    /// 1-based index `t` of the returned iterate `x⁽ᵗ⁾`; `T + 1` is the last.
    pub output_index: usize,
    pub output: Vec<Vec<f64>>,
}

impl RunRecord {
    pub fn new(seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed,
            blocks: Vec::new(),
            iterate_hash: Vec::new(),
            series: BTreeMap::new(),
            output_index: 0,
            output: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, value: f64) {
        self.series.entry(String::from(name)).or_default().push(value);
    }

    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.series.get(name).map(Vec::as_slice)
    }

    /// Number of recorded steps (iterations or epochs).
    pub fn len(&self) -> usize {
        self.iterate_hash.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterate_hash.is_empty()
    }
}
