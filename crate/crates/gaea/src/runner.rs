//! Executes experiment specs: one job per (variant, horizon, seed), fanned out
//! over a thread pool, collected in a fixed order.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gaea_core::blockmd::{horizon_step, run_multi_block, theory_schedule, RegularityConstants, RunConfig};
use gaea_core::geometry::{BlockGeometry, Dgf, NormKind};
use gaea_core::mirror::UpdateRule;
use gaea_core::problems::{
    estimate_second_moments, planted_costs, simplex_linear, Objective, RwcBenchmark, SimplexLinear,
};
use gaea_core::record::{series, RunRecord};
use gaea_core::stationarity::{bregman_stationarity, ProxConfig};
use gaea_core::supernet::{
    baseline_softmax_search, gaea_search, planted_task, Dataset, DiscreteArchitecture, SearchConfig, SearchSpace,
};
use gaea_core::{StreamRng, StreamTag};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::experiment::{
    DataSource, ExperimentSpec, Horizon, Method, OptimizerSpec, ProblemSpec, SpaceSource, SupernetSpec,
};

/// Entropies in records and summaries use the natural logarithm.
pub const ENTROPY_LOG_BASE: &str = "e";

/// Names of the scalar metrics attached to each record.
pub mod metric {
    pub const FINAL_LOSS: &str = "final_loss";
    pub const STATIONARITY: &str = "stationarity";
    pub const ITERATIONS: &str = "iterations";
    pub const STEP: &str = "step";
    pub const FINAL_ENTROPY: &str = "final_entropy";
    pub const FINAL_TRAIN_LOSS: &str = "final_train_loss";
    pub const FINAL_VAL_LOSS: &str = "final_val_loss";
}

/// One run of one variant on one seed, as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordDocument {
    pub schema_version: u32,
    pub experiment: String,
    pub variant: String,
    pub method: Method,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    pub entropy_log_base: String,
    pub config: ExperimentSpec,
    pub record: RunRecord,
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub architecture: Option<Vec<usize>>,
    pub wall_clock_secs: f64,
}

impl RecordDocument {
    /// Variant name, suffixed with `@T=<horizon>` for sweeps.
    pub fn group(&self) -> String {
        match self.horizon {
            Some(t) => format!("{}@T={t}", self.variant),
            None => self.variant.clone(),
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}-seed{}.json", self.group(), self.seed)
    }
}

/// Result of one job; failures are kept per seed instead of aborting the run.
#[derive(Debug)]
pub struct JobOutcome {
    pub variant: String,
    pub horizon: Option<usize>,
    pub seed: u64,
    pub result: Result<RecordDocument>,
}

enum Prepared {
    Rwc { problem: RwcBenchmark, constants: RegularityConstants },
    Simplex,
    Supernet { space: SearchSpace, data: Option<Dataset> },
}

/// Runs every job of `spec`, in parallel, returning outcomes ordered by
/// variant, horizon and seed.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<JobOutcome>> {
    spec.validate()?;
    let prepared = prepare(spec)?;
    let horizons: Vec<Option<usize>> = match spec.optimizer.as_ref().map(|o| &o.horizon) {
        Some(Horizon::Sweep { iterations }) => iterations.iter().map(|t| Some(*t)).collect(),
        _ => vec![None],
    };
    let mut jobs = Vec::new();
    for v in &spec.variants {
        for h in &horizons {
            for seed in spec.seeds.iter() {
                jobs.push((v, *h, seed));
            }
        }
    }
    Ok(jobs
        .into_par_iter()
        .map(|(v, horizon, seed)| JobOutcome {
            variant: v.name.clone(),
            horizon,
            seed,
            result: run_job(spec, &prepared, v.name.as_str(), v.method, horizon, seed),
        })
        .collect())
}

/// Writes each successful record to `dir/<experiment>/` and returns the paths.
pub fn write_records(dir: &Path, outcomes: &[JobOutcome]) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for doc in outcomes.iter().filter_map(|o| o.result.as_ref().ok()) {
        let path = dir.join(&doc.experiment).join(doc.file_name());
        crate::io::write_json(&path, doc)?;
        paths.push(path);
    }
    Ok(paths)
}

fn prepare(spec: &ExperimentSpec) -> Result<Prepared> {
    match &spec.problem {
        ProblemSpec::RwcBenchmark(params) => {
            let problem = RwcBenchmark::new(params.clone())?;
            let opt = spec.optimizer.as_ref().expect("validated");
            let init = problem.default_init();
            let mut rng = StreamRng::new(opt.moments.seed, StreamTag::Problem, 1);
            let points = problem.sample_region(opt.moments.points, opt.moments.radius, &mut rng);
            let constants = constants_for(&problem, &init, &points, opt)?;
            Ok(Prepared::Rwc { problem, constants })
        }
        ProblemSpec::SimplexLinear(_) => Ok(Prepared::Simplex),
        ProblemSpec::Supernet(s) => {
            let space = load_space(s)?;
            let data = match &s.data {
                DataSource::Csv { path } => Some(crate::io::read_dataset(path)?),
                DataSource::Planted { seed: Some(seed), .. } => Some(planted_data(&space, &s.data, *seed)?),
                DataSource::Planted { seed: None, .. } => None,
            };
            Ok(Prepared::Supernet { space, data })
        }
    }
}

/// Declared or measured second moments, scaled by the safety factor.
pub fn constants_for<O: Objective + ?Sized>(
    problem: &O,
    init: &[Vec<f64>],
    points: &[Vec<Vec<f64>>],
    opt: &OptimizerSpec,
) -> Result<RegularityConstants> {
    let moments = match problem.second_moment_bounds() {
        Some(m) => m,
        None => {
            let mut rng = StreamRng::new(opt.moments.seed, StreamTag::Noise, 1);
            estimate_second_moments(problem, points, opt.moments.draws, &mut rng)
        }
    };
    let constants = RegularityConstants {
        gamma: problem.gamma(),
        second_moments: moments.iter().map(|m| m * opt.moments.safety).collect(),
        initial_value: problem.value(init),
        lower_bound: problem.lower_bound(),
    };
    constants.validate()?;
    Ok(constants)
}

fn load_space(s: &SupernetSpec) -> Result<SearchSpace> {
    match &s.space {
        SpaceSource::Inline(space) => Ok(space.clone()),
        SpaceSource::File { file } => crate::io::read_space(file),
    }
}

fn planted_data(space: &SearchSpace, source: &DataSource, seed: u64) -> Result<Dataset> {
    let DataSource::Planted { arch, samples, noise, weight_scale, .. } = source else {
        unreachable!("only planted sources are generated")
    };
    let arch = DiscreteArchitecture::new(arch.clone());
    if arch.ops.len() != space.num_edges() || arch.ops.iter().any(|o| *o >= space.num_ops()) {
        return Err(HarnessError::Spec("planted architecture does not fit the search space".into()));
    }
    Ok(planted_task(space, &arch, *samples, *noise, *weight_scale, seed)?.data)
}

fn run_job(
    spec: &ExperimentSpec,
    prepared: &Prepared,
    variant: &str,
    method: Method,
    horizon: Option<usize>,
    seed: u64,
) -> Result<RecordDocument> {
    let start = Instant::now();
    let mut metrics = BTreeMap::new();
    let mut architecture = None;
    let record = match (prepared, &spec.problem) {
        (Prepared::Rwc { problem, constants }, _) => {
            let opt = spec.optimizer.as_ref().expect("validated");
            run_block_problem(problem, &problem.default_init(), constants, opt, method, horizon, seed, &mut metrics)?
        }
        (Prepared::Simplex, ProblemSpec::SimplexLinear(s)) => {
            let opt = spec.optimizer.as_ref().expect("validated");
            let cost_seed = s.cost_seed.unwrap_or(seed);
            let cost = planted_costs(s.k, s.gap, &mut StreamRng::new(cost_seed, StreamTag::Problem, s.k as u64));
            let problem: SimplexLinear = simplex_linear(s.k, cost)?.with_noise(s.noise);
            let init = vec![vec![1.0 / s.k as f64; s.k]];
            let points = vec![init.clone()];
            let constants = constants_for(&problem, &init, &points, opt)?;
            run_block_problem(&problem, &init, &constants, opt, method, horizon, seed, &mut metrics)?
        }
        (Prepared::Supernet { space, data }, ProblemSpec::Supernet(s)) => {
            let owned;
            let data = match data {
                Some(d) => d,
                None => {
                    owned = planted_data(space, &s.data, seed)?;
                    &owned
                }
            };
            let cfg = SearchConfig { seed, ..spec.search.clone().expect("validated") };
            let outcome = match method {
                Method::GaeaEg => gaea_search(space, data, &cfg)?,
                Method::SoftmaxBaseline => baseline_softmax_search(space, data, &cfg)?,
                Method::EuclideanSgd => unreachable!("rejected by validation"),
            };
            let last = |name: &str| outcome.record.series(name).and_then(|s| s.last().copied());
            for (key, name) in [
                (metric::FINAL_ENTROPY, series::ENTROPY),
                (metric::FINAL_TRAIN_LOSS, series::TRAIN_LOSS),
                (metric::FINAL_VAL_LOSS, series::VAL_LOSS),
            ] {
                if let Some(v) = last(name) {
                    metrics.insert(key.to_string(), v);
                }
            }
            architecture = Some(outcome.architecture().ops);
            outcome.record
        }
        _ => unreachable!("prepared state matches the problem kind"),
    };
    Ok(RecordDocument {
        schema_version: crate::experiment::SCHEMA_VERSION,
        experiment: spec.name.clone(),
        variant: variant.to_string(),
        method,
        seed,
        horizon,
        entropy_log_base: ENTROPY_LOG_BASE.to_string(),
        config: spec.clone(),
        record,
        metrics,
        architecture,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

/// Rules for `method`: the problem's own geometry for EG, the Euclidean
/// distance on the same domain for projected SGD.
pub fn rules_for<O: Objective + ?Sized>(problem: &O, method: Method, step: f64) -> Result<Vec<UpdateRule>> {
    problem
        .geometry()
        .blocks()
        .iter()
        .map(|block| {
            let geometry = match (method, block.dgf()) {
                (Method::EuclideanSgd, Dgf::NegEntropy) => {
                    BlockGeometry::new(block.dim(), NormKind::L2, Dgf::SquaredEuclidean, block.domain())?
                }
                _ => block.clone(),
            };
            Ok(UpdateRule::closed_form(geometry, step)?)
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn run_block_problem<O: Objective + ?Sized>(
    problem: &O,
    init: &[Vec<f64>],
    constants: &RegularityConstants,
    opt: &OptimizerSpec,
    method: Method,
    horizon: Option<usize>,
    seed: u64,
    metrics: &mut BTreeMap<String, f64>,
) -> Result<RunRecord> {
    let (iterations, step) = match (&opt.horizon, horizon) {
        (Horizon::Theory { eps }, _) => {
            let s = theory_schedule(constants, *eps)?;
            (s.iterations, s.step)
        }
        (Horizon::Sweep { .. }, Some(t)) => (t, horizon_step(constants, t)?),
        (Horizon::Fixed { iterations, step }, _) => (*iterations, *step),
        (Horizon::Sweep { .. }, None) => unreachable!("sweeps always carry a horizon"),
    };
    let cfg = RunConfig { selection: opt.selection, output: opt.output, ..RunConfig::theory(iterations, step, seed) };
    let rules = rules_for(problem, method, step)?;
    let record = run_multi_block(problem, init, &cfg, &rules)?;
    metrics.insert(metric::ITERATIONS.to_string(), iterations as f64);
    metrics.insert(metric::STEP.to_string(), step);
    metrics.insert(metric::FINAL_LOSS.to_string(), problem.value(&record.output));
    if let Some(h) = record.series(series::ENTROPY).and_then(|s| s.last()) {
        metrics.insert(metric::FINAL_ENTROPY.to_string(), *h);
    }
    if opt.stationarity {
        // projected steps may reach the simplex boundary, where the entropic
        // prox is undefined; the metric is then left out
        if let Ok(delta) = bregman_stationarity(problem, &record.output, &ProxConfig::for_gamma(problem.gamma())) {
            metrics.insert(metric::STATIONARITY.to_string(), delta);
        }
    }
    Ok(record)
}
