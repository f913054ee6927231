//! Frozen regression records: one block mirror descent run on the nonconvex
//! benchmark and one GAEA search. `verify` reruns both and requires the
//! trajectories to be bit-identical.

use std::path::{Path, PathBuf};

use gaea_core::blockmd::{run_two_block, RunConfig};
use gaea_core::mirror::UpdateRule;
use gaea_core::problems::{Objective, RwcBenchmark, RwcParams};
use gaea_core::record::RunRecord;
use gaea_core::supernet::{gaea_search, planted_task, DiscreteArchitecture, OpKind, SearchConfig, SearchSpace};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const RWC_FILE: &str = "rwc_benchmark.json";
pub const SEARCH_FILE: &str = "gaea_search.json";

const RWC_TEXT: &str = include_str!("../golden/rwc_benchmark.json");
const SEARCH_TEXT: &str = include_str!("../golden/gaea_search.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GoldenSetup {
    RwcBenchmark {
        params: RwcParams,
        iterations: usize,
        step: f64,
        seed: u64,
    },
    GaeaSearch {
        space: SearchSpace,
        arch: Vec<usize>,
        samples: usize,
        noise: f64,
        task_seed: u64,
        search: SearchConfig,
    },
}

impl GoldenSetup {
    pub fn run(&self) -> Result<RunRecord> {
        match self {
            GoldenSetup::RwcBenchmark { params, iterations, step, seed } => {
                let problem = RwcBenchmark::new(params.clone())?;
                let init = problem.default_init();
                let geometry = problem.geometry();
                let rules = [
                    UpdateRule::closed_form(geometry.block(0).clone(), *step)?,
                    UpdateRule::closed_form(geometry.block(1).clone(), *step)?,
                ];
                Ok(run_two_block(&problem, &init[0], &init[1], &RunConfig::theory(*iterations, *step, *seed), &rules)?)
            }
            GoldenSetup::GaeaSearch { space, arch, samples, noise, task_seed, search } => {
                let arch = DiscreteArchitecture::new(arch.clone());
                let task = planted_task(space, &arch, *samples, *noise, 1.0, *task_seed)?;
                Ok(gaea_search(space, &task.data, search)?.record)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldenRecord {
    pub name: String,
    pub setup: GoldenSetup,
    pub record: RunRecord,
}

/// The two frozen configurations, by file name.
pub fn setups() -> Vec<(&'static str, GoldenSetup)> {
    let space = SearchSpace::three_edge(OpKind::DEFAULT.to_vec(), 2).expect("fixed space is valid");
    vec![
        (
            RWC_FILE,
            GoldenSetup::RwcBenchmark {
                params: RwcParams { w_noise: 2.0, theta_noise: 2.0, ..RwcParams::default() },
                iterations: 300,
                step: 0.05,
                seed: 7,
            },
        ),
        (
            SEARCH_FILE,
            GoldenSetup::GaeaSearch {
                space,
                arch: vec![2, 4, 3],
                samples: 64,
                noise: 0.05,
                task_seed: 11,
                search: SearchConfig { epochs: 6, warmup_epochs: 1, lr_arch: 1.0, seed: 3, ..SearchConfig::default() },
            },
        ),
    ]
}

/// Reruns every setup and writes the golden files into `dir`.
pub fn write_goldens(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for (file, setup) in setups() {
        let record = setup.run()?;
        let golden = GoldenRecord { name: file.trim_end_matches(".json").to_string(), setup, record };
        let path = dir.join(file);
        crate::io::write_json(&path, &golden)?;
        paths.push(path);
    }
    Ok(paths)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldenCheck {
    pub name: String,
    pub steps: usize,
    /// `None` when the rerun matches bit for bit.
    pub mismatch: Option<String>,
}

/// Compares a rerun against the frozen record. Floats are compared through
/// their round-trip JSON text, which differs whenever the bits differ.
pub fn check(text: &str, expected_setup: &GoldenSetup) -> Result<GoldenCheck> {
    let golden: GoldenRecord =
        serde_json::from_str(text).map_err(|e| HarnessError::json("<golden record>", e))?;
    if &golden.setup != expected_setup {
        return Err(HarnessError::Data(format!("golden '{}' was frozen from a different setup", golden.name)));
    }
    let rerun = golden.setup.run()?;
    let mismatch = first_mismatch(&golden.record, &rerun);
    Ok(GoldenCheck { name: golden.name, steps: golden.record.len(), mismatch })
}

fn first_mismatch(want: &RunRecord, got: &RunRecord) -> Option<String> {
    if want.iterate_hash != got.iterate_hash {
        let t = want.iterate_hash.iter().zip(&got.iterate_hash).position(|(a, b)| a != b).unwrap_or(want.len().min(got.len()));
        return Some(format!("iterate hash differs at step {}", t + 1));
    }
    let text = |r: &RunRecord| serde_json::to_string(r).expect("records serialize");
    if text(want) != text(got) {
        for (name, values) in &want.series {
            if got.series.get(name) != Some(values) {
                return Some(format!("series '{name}' differs"));
            }
        }
        return Some("record differs outside the series".into());
    }
    None
}

/// Checks both embedded golden files.
pub fn check_embedded() -> Result<Vec<GoldenCheck>> {
    setups()
        .into_iter()
        .map(|(file, setup)| check(if file == RWC_FILE { RWC_TEXT } else { SEARCH_TEXT }, &setup))
        .collect()
}
