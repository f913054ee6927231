//! The acceptance suite run by `gaea verify` and the `acceptance` test target.
//!
//! Each criterion computes its evidence from scratch, reports one line and is
//! timed against its runtime limit.

use std::fmt;
use std::time::Instant;

use gaea_core::geometry::{BlockGeometry, Domain};
use gaea_core::mirror::{eg_step, euclidean_step, StepMode, UpdateRule};
use gaea_core::numerics::{finite_diff_grad, norm_inf, relative_error, sub};
use gaea_core::problems::{
    iterations_to_suboptimality, planted_costs, simplex_linear, Objective, RwcBenchmark, SimplexMethod,
};
use gaea_core::supernet::{
    enumerate_oracle, gaea_search, gradient_variances, init_weights, planted_task, DiscreteArchitecture, SearchConfig,
    SearchSpace, SupernetObjective, TrainConfig,
};
use gaea_core::{ArchParams, Chart, StreamRng, StreamTag};
use rayon::prelude::*;

use crate::aggregate::{aggregate, median, Summary};
use crate::error::{HarnessError, Result};
use crate::experiment::{ExperimentSpec, ProblemSpec, SpaceSource};
use crate::runner::{metric, run_experiment, RecordDocument};

pub const RATE_EPS050: &str = include_str!("../specs/rate_eps050.json");
pub const RATE_EPS025: &str = include_str!("../specs/rate_eps025.json");
pub const RATE_SWEEP: &str = include_str!("../specs/rate_sweep.json");
pub const ENTROPY_TOY: &str = include_str!("../specs/entropy_toy.json");
pub const TOY_SPACE: &str = include_str!("../specs/toy_space.json");
pub const THREE_EDGE_SPACE: &str = include_str!("../specs/three_edge_space.json");

/// Planted architecture of the toy supernet.
pub const TOY_ARCH: [usize; 6] = [2, 4, 0, 3, 1, 2];
/// Planted architecture of the three-edge space: softplus, zero, diagonal.
/// The zero edge makes node 2 depend on the input only through node 1.
pub const THREE_EDGE_ARCH: [usize; 3] = [2, 0, 1];

const SEEDS: u64 = 50;

pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    pub limit_secs: f64,
    check: fn() -> Result<Evidence>,
}

struct Evidence {
    passed: bool,
    detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed_secs: f64,
    pub limit_secs: f64,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{}] {}: {} ({:.1} s, limit {:.0} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.elapsed_secs,
            self.limit_secs
        )
    }
}

pub fn criteria() -> Vec<Criterion> {
    vec![
        Criterion { id: 1, name: "bregman axioms", limit_secs: 10.0, check: bregman_axioms },
        Criterion { id: 2, name: "closed-form equivalences", limit_secs: 30.0, check: closed_forms },
        Criterion { id: 3, name: "gradient fidelity", limit_secs: 120.0, check: gradient_fidelity },
        Criterion { id: 4, name: "stationarity rate", limit_secs: 600.0, check: stationarity_rate },
        Criterion { id: 5, name: "dimension separation", limit_secs: 300.0, check: dimension_separation },
        Criterion { id: 6, name: "entropy collapse", limit_secs: 600.0, check: entropy_collapse },
        Criterion { id: 7, name: "oracle recovery", limit_secs: 900.0, check: oracle_recovery },
        Criterion { id: 8, name: "variance ordering", limit_secs: 300.0, check: variance_ordering },
        Criterion { id: 9, name: "golden records", limit_secs: 120.0, check: golden_records },
    ]
}

/// Runs one criterion; errors and overruns count as failures.
pub fn run_criterion(c: &Criterion) -> CriterionResult {
    let start = Instant::now();
    let evidence = (c.check)();
    let elapsed_secs = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = match evidence {
        Ok(e) => (e.passed, e.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    if elapsed_secs > c.limit_secs {
        passed = false;
        detail.push_str("; over the runtime limit");
    }
    CriterionResult { id: c.id, name: c.name, passed, detail, elapsed_secs, limit_secs: c.limit_secs }
}

/// Runs the selected criteria (all when `only` is empty) one after another.
pub fn run_all(only: &[u8]) -> Vec<CriterionResult> {
    criteria().iter().filter(|c| only.is_empty() || only.contains(&c.id)).map(run_criterion).collect()
}

pub fn toy_space() -> SearchSpace {
    serde_json::from_str(TOY_SPACE).expect("embedded toy space is valid")
}

pub fn three_edge_space() -> SearchSpace {
    serde_json::from_str(THREE_EDGE_SPACE).expect("embedded three-edge space is valid")
}

/// Embedded experiment spec; file references to the toy space are inlined.
pub fn embedded_spec(text: &str) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::from_json(text)?;
    if let ProblemSpec::Supernet(s) = &mut spec.problem {
        if matches!(s.space, SpaceSource::File { .. }) {
            s.space = SpaceSource::Inline(toy_space());
        }
    }
    Ok(spec)
}

fn run_and_summarize(text: &str) -> Result<Summary> {
    let spec = embedded_spec(text)?;
    let mut docs: Vec<RecordDocument> = Vec::new();
    for outcome in run_experiment(&spec)? {
        let label = format!("{} seed {}", outcome.variant, outcome.seed);
        docs.push(outcome.result.map_err(|e| HarnessError::Data(format!("{label}: {e}")))?);
    }
    aggregate(&docs).into_iter().next().ok_or_else(|| HarnessError::Data("no records".into()))
}

/// Strictly positive point of the simplex; larger `power` gives sparser mass.
fn simplex_point(k: usize, power: f64, rng: &mut StreamRng) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| (-(1.0 - rng.uniform()).ln()).powf(power) + 1e-12).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v / total).collect()
}

fn feasible_point(geometry: &BlockGeometry, rng: &mut StreamRng) -> Vec<f64> {
    let power = [1.0, 2.0, 4.0][rng.below(3)];
    match geometry.domain() {
        Domain::Unconstrained => {
            let scale = rng.normal().exp();
            (0..geometry.dim()).map(|_| scale * rng.normal()).collect()
        }
        Domain::Simplex => simplex_point(geometry.dim(), power, rng),
        Domain::SimplexProduct { count, size } => (0..count).flat_map(|_| simplex_point(size, power, rng)).collect(),
    }
}

fn bregman_axioms() -> Result<Evidence> {
    let geometries = [
        ("l2", BlockGeometry::euclidean(6)),
        ("l2 simplex", BlockGeometry::euclidean_simplex(6)),
        ("entropy", BlockGeometry::entropic_simplex(6)),
        ("entropy k=50", BlockGeometry::entropic_simplex(50)),
        ("entropy 4x5", BlockGeometry::entropic_simplex_product(4, 5)),
    ];
    let mut failures = Vec::new();
    let mut min_slack = f64::INFINITY;
    for (index, (label, geometry)) in geometries.iter().enumerate() {
        let mut rng = StreamRng::new(1, StreamTag::Problem, index as u64);
        let mut bad = 0;
        for _ in 0..1000 {
            let x = feasible_point(geometry, &mut rng);
            let y = feasible_point(geometry, &mut rng);
            let d = geometry.bregman(&x, &y)?;
            let self_d = geometry.bregman(&x, &x)?;
            let n = geometry.norm(&sub(&x, &y));
            let slack = d - 0.5 * n * n;
            min_slack = min_slack.min(slack);
            // for ½‖·‖₂² the two sides agree exactly up to rounding
            if !(d >= 0.0) || self_d.abs() > 1e-12 || !(slack >= -1e-12 * d.max(1.0)) {
                bad += 1;
            }
        }
        if bad > 0 {
            failures.push(format!("{label}: {bad} violations"));
        }
    }
    Ok(Evidence {
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("5 geometries x 1000 pairs, smallest D - ½‖x-y‖² = {min_slack:.3e}")
        } else {
            failures.join(", ")
        },
    })
}

fn closed_forms() -> Result<Evidence> {
    let results: Vec<(bool, f64, f64)> = (0..1000u64)
        .into_par_iter()
        .map(|i| -> Result<(bool, f64, f64)> {
            let mut rng = StreamRng::new(2, StreamTag::Problem, i);
            let n = 2 + rng.below(9);
            let eta = 10f64.powf(-3.0 + 4.0 * rng.uniform());
            let g_scale = 10f64.powf(-1.0 + 2.0 * rng.uniform());
            let g: Vec<f64> = (0..n).map(|_| g_scale * rng.normal()).collect();

            let x: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            let generic = UpdateRule::new(BlockGeometry::euclidean(n), eta, StepMode::generic())?.apply(&x, &g)?;
            let exact = generic == euclidean_step(&x, &g, eta);

            let theta = simplex_point(n, 1.0 + rng.uniform(), &mut rng);
            let generic = UpdateRule::new(BlockGeometry::entropic_simplex(n), eta, StepMode::generic())?.apply(&theta, &g)?;
            let eg_gap = norm_inf(&sub(&generic, &eg_step(&theta, &g, eta)?));

            let (m, k) = (2 + rng.below(3), 2 + rng.below(5));
            let geometry = BlockGeometry::entropic_simplex_product(m, k);
            let theta: Vec<f64> = (0..m).flat_map(|_| simplex_point(k, 1.5, &mut rng)).collect();
            let g: Vec<f64> = (0..m * k).map(|_| g_scale * rng.normal()).collect();
            let generic = UpdateRule::new(geometry.clone(), eta, StepMode::generic())?.apply(&theta, &g)?;
            let closed = UpdateRule::closed_form(geometry, eta)?.apply(&theta, &g)?;
            Ok((exact, eg_gap, norm_inf(&sub(&generic, &closed))))
        })
        .collect::<Result<_>>()?;
    let exact = results.iter().filter(|r| r.0).count();
    let eg = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let product = results.iter().map(|r| r.2).fold(0.0, f64::max);
    Ok(Evidence {
        passed: exact == results.len() && eg <= 1e-9 && product <= 1e-9,
        detail: format!(
            "euclidean identical on {exact}/1000, max |generic - eg| = {eg:.2e}, product max {product:.2e} (tol 1e-9)"
        ),
    })
}

/// Worst relative error between analytic block gradients and central
/// differences of the value over 100 points.
fn worst_gradient_error<O: Objective + Sync>(objective: &O, points: &[Vec<Vec<f64>>]) -> f64 {
    points
        .par_iter()
        .map(|x| {
            let geometry = objective.geometry();
            (0..geometry.len())
                .map(|block| {
                    let analytic = objective.gradient(x, block);
                    let fd = finite_diff_grad(
                        |v| {
                            let mut probe = x.clone();
                            probe[block] = v.to_vec();
                            objective.value(&probe)
                        },
                        &x[block],
                        1e-5,
                    );
                    match fd {
                        Ok(fd) => relative_error(&analytic, &fd, 1e-6),
                        Err(_) => f64::INFINITY,
                    }
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

fn gradient_fidelity() -> Result<Evidence> {
    let rwc = RwcBenchmark::new(embedded_rwc_params()?)?;
    let rwc_points = rwc.sample_region(100, 1.5, &mut StreamRng::new(3, StreamTag::Problem, 0));

    let mut rng = StreamRng::new(3, StreamTag::Problem, 1);
    let cost: Vec<f64> = (0..10).map(|_| rng.normal()).collect();
    let linear = simplex_linear(10, cost)?;
    let linear_points: Vec<Vec<Vec<f64>>> = (0..100).map(|_| vec![simplex_point(10, 1.0, &mut rng)]).collect();

    let space = toy_space();
    let task = planted_task(&space, &DiscreteArchitecture::new(TOY_ARCH.to_vec()), 32, 0.1, 1.0, 3)?;
    let supernet = SupernetObjective::new(space.clone(), task.data, 1e-3, 8, 1.0)?;
    let supernet_points: Vec<Vec<Vec<f64>>> = (0..100)
        .map(|i| {
            let w = init_weights(&space, 0.5, 1000 + i);
            let theta = (0..space.num_edges()).flat_map(|_| simplex_point(space.num_ops(), 1.0, &mut rng)).collect();
            vec![w, theta]
        })
        .collect();

    let errors = [
        ("rwc", worst_gradient_error(&rwc, &rwc_points)),
        ("simplex_linear", worst_gradient_error(&linear, &linear_points)),
        ("supernet", worst_gradient_error(&supernet, &supernet_points)),
    ];
    Ok(Evidence {
        passed: errors.iter().all(|(_, e)| *e <= 1e-4),
        detail: errors.iter().map(|(n, e)| format!("{n} {e:.2e}")).collect::<Vec<_>>().join(", ")
            + " worst relative error over 100 points (tol 1e-4)",
    })
}

fn embedded_rwc_params() -> Result<gaea_core::problems::RwcParams> {
    match embedded_spec(RATE_SWEEP)?.problem {
        ProblemSpec::RwcBenchmark(p) => Ok(p),
        _ => Err(HarnessError::Spec("rate sweep must use the rwc benchmark".into())),
    }
}

fn stationarity_rate() -> Result<Evidence> {
    let mut passed = true;
    let mut parts = Vec::new();
    for (text, eps) in [(RATE_EPS050, 0.5), (RATE_EPS025, 0.25)] {
        let summary = run_and_summarize(text)?;
        let group = &summary.groups[0];
        let stat = group.metrics.get(metric::STATIONARITY);
        let iterations = group.metrics.get(metric::ITERATIONS).map_or(0.0, |s| s.median);
        match stat {
            Some(s) if s.count == SEEDS as usize => {
                passed &= s.mean <= eps;
                parts.push(format!("eps {eps}: T = {iterations}, mean Δ = {:.4} ± {:.4}", s.mean, s.std_err.unwrap_or(f64::NAN)));
            }
            _ => {
                passed = false;
                parts.push(format!("eps {eps}: stationarity missing for some seeds"));
            }
        }
    }
    let summary = run_and_summarize(RATE_SWEEP)?;
    let curve = summary.curves.iter().find(|c| c.metric == metric::STATIONARITY);
    match curve {
        Some(c) if c.points.len() == 7 => {
            let slope = c.slope.unwrap_or(f64::NAN);
            passed &= (slope + 0.5).abs() <= 0.15;
            let counts_ok = summary
                .groups
                .iter()
                .all(|g| g.metrics.get(metric::STATIONARITY).is_some_and(|s| s.count == SEEDS as usize));
            passed &= counts_ok;
            parts.push(format!("slope over T = 64..4096: {slope:.3} (target -0.5 ± 0.15)"));
        }
        _ => {
            passed = false;
            parts.push("sweep curve missing".into());
        }
    }
    Ok(Evidence { passed, detail: parts.join("; ") })
}

/// Iteration counts for both methods on 20 planted cost vectors of size `k`.
fn separation_counts(k: usize) -> Result<Vec<(usize, usize)>> {
    (0..20u64)
        .into_par_iter()
        .map(|r| {
            let cost = planted_costs(k, 0.5, &mut StreamRng::new(r, StreamTag::Problem, k as u64));
            let problem = simplex_linear(k, cost)?;
            let count = |method| -> Result<usize> {
                iterations_to_suboptimality(&problem, method, 0.05, 10_000_000)?
                    .ok_or_else(|| HarnessError::Data(format!("{method:?} did not reach 0.05 at k = {k}")))
            };
            Ok((count(SimplexMethod::ExponentiatedGradient)?, count(SimplexMethod::ProjectedGradient)?))
        })
        .collect()
}

fn dimension_separation() -> Result<Evidence> {
    let small = separation_counts(10)?;
    let large = separation_counts(1000)?;
    let medians = |counts: &[(usize, usize)], pick: fn(&(usize, usize)) -> usize| {
        median(&counts.iter().map(|c| pick(c) as f64).collect::<Vec<_>>())
    };
    let paired = |pick: fn(&(usize, usize)) -> usize| {
        median(&small.iter().zip(&large).map(|(s, l)| pick(l) as f64 / pick(s) as f64).collect::<Vec<_>>())
    };
    let eg = medians(&large, |c| c.0) / medians(&small, |c| c.0);
    let gd = medians(&large, |c| c.1) / medians(&small, |c| c.1);
    let (eg_paired, gd_paired) = (paired(|c| c.0), paired(|c| c.1));
    Ok(Evidence {
        passed: eg <= 3.0 && eg_paired <= 3.0 && gd >= 10.0 && gd_paired >= 10.0,
        detail: format!(
            "k 10 -> 1000 growth: EG {eg:.2} (paired {eg_paired:.2}, need <= 3), projected GD {gd:.1} (paired {gd_paired:.1}, need >= 10)"
        ),
    })
}

fn entropy_collapse() -> Result<Evidence> {
    let spec = embedded_spec(ENTROPY_TOY)?;
    let warmup = spec.search.as_ref().map_or(0, |s| s.warmup_epochs);
    let ops = toy_space().num_ops() as f64;
    let summary = run_and_summarize(ENTROPY_TOY)?;
    let band = |variant: &str| -> Result<Vec<f64>> {
        let group = summary
            .groups
            .iter()
            .find(|g| g.variant == variant && g.seeds.len() == SEEDS as usize)
            .ok_or_else(|| HarnessError::Data(format!("variant '{variant}' is missing seeds")))?;
        group
            .series
            .get(gaea_core::record::series::ENTROPY)
            .map(|b| b.median.clone())
            .ok_or_else(|| HarnessError::Data("entropy series missing".into()))
    };
    let gaea = band("gaea")?;
    let softmax = band("softmax")?;
    let post = warmup..gaea.len().min(softmax.len());
    let below = post.clone().filter(|&e| gaea[e] < softmax[e]).count();
    let last = *gaea.last().unwrap_or(&f64::NAN);
    let cap = 0.5 * ops.ln();
    Ok(Evidence {
        passed: !post.is_empty() && below == post.len() && last <= cap,
        detail: format!(
            "GAEA median below baseline at {below}/{} post-warmup epochs; final {last:.3} vs baseline {:.3}, cap {cap:.3}",
            post.len(),
            softmax.last().copied().unwrap_or(f64::NAN)
        ),
    })
}

/// Search and oracle settings for the three-edge recovery check.
pub fn recovery_configs() -> (TrainConfig, SearchConfig) {
    (
        TrainConfig { epochs: 40, lr: 0.05, ..TrainConfig::default() },
        SearchConfig { epochs: 40, lr_weights: 0.05, lr_arch: 1.0, warmup_epochs: 10, ..SearchConfig::default() },
    )
}

fn oracle_recovery() -> Result<Evidence> {
    let space = three_edge_space();
    let task = planted_task(&space, &DiscreteArchitecture::new(THREE_EDGE_ARCH.to_vec()), 256, 0.1, 1.0, 0)?;
    let (train, search) = recovery_configs();
    let ranking = enumerate_oracle(&space, &task.data, &train)?;
    let top: Vec<&DiscreteArchitecture> = ranking.iter().take(3).map(|e| &e.arch).collect();
    let hits: Vec<bool> = (0..SEEDS)
        .into_par_iter()
        .map(|seed| -> Result<bool> {
            let out = gaea_search(&space, &task.data, &SearchConfig { seed, ..search.clone() })?;
            Ok(top.contains(&&out.architecture()))
        })
        .collect::<Result<_>>()?;
    let count = hits.iter().filter(|h| **h).count();
    let rate = count as f64 / SEEDS as f64;
    Ok(Evidence {
        passed: rate >= 0.8,
        detail: format!(
            "{count}/{SEEDS} seeds in the oracle top 3 of {} architectures (need 80%); top losses {:.4}, {:.4}, {:.4}",
            ranking.len(),
            ranking[0].loss,
            ranking[1].loss,
            ranking[2].loss
        ),
    })
}

fn variance_ordering() -> Result<Evidence> {
    let space = toy_space();
    let arch = DiscreteArchitecture::new(TOY_ARCH.to_vec());
    let runs: Vec<(f64, f64)> = (0..SEEDS)
        .into_par_iter()
        .map(|seed| -> Result<(f64, f64)> {
            let task = planted_task(&space, &arch, 128, 0.1, 1.0, seed)?;
            let w = init_weights(&space, 0.5, seed);
            let theta = ArchParams::uniform(space.num_edges(), space.num_ops(), Chart::Simplex);
            let v = gradient_variances(&space, &task.data, &w, &theta, 16, 100, seed)?;
            Ok((v.score, v.mixture))
        })
        .collect::<Result<_>>()?;
    let score = median(&runs.iter().map(|r| r.0).collect::<Vec<_>>());
    let mixture = median(&runs.iter().map(|r| r.1).collect::<Vec<_>>());
    let wins = runs.iter().filter(|r| r.0 > r.1).count();
    Ok(Evidence {
        passed: score > mixture,
        detail: format!(
            "median total variance: score {score:.4e} vs mixture {mixture:.4e} (budget 16, 100 replicates); score larger on {wins}/{SEEDS} seeds"
        ),
    })
}

fn golden_records() -> Result<Evidence> {
    let checks = crate::golden::check_embedded()?;
    let passed = checks.iter().all(|c| c.mismatch.is_none());
    let detail = checks
        .iter()
        .map(|c| match &c.mismatch {
            None => format!("{} identical over {} steps", c.name, c.steps),
            Some(m) => format!("{}: {m}", c.name),
        })
        .collect::<Vec<_>>()
        .join(", ");
    Ok(Evidence { passed, detail })
}
