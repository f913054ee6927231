//! Block-stochastic mirror descent.
//!
//! Each iteration picks one block, queries a stochastic gradient for it and
//! applies that block's mirror update while every other block stays frozen.
//! With uniform block choice and a step-weighted random output iterate this
//! is the algorithm covered by the convergence theory; cyclic choice with the
//! last iterate is the alternating scheme used in practice.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{mean_row_entropy, Dgf, ProductGeometry};
use crate::mirror::UpdateRule;
use crate::numerics::{hash_blocks, StreamRng, StreamTag};
use crate::problems::Objective;
use crate::record::{series, RunRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSchedule {
    Constant(f64),
    /// One step per iteration; must be positive and non-increasing.
    Sequence(Vec<f64>),
}

impl StepSchedule {
    pub fn at(&self, t: usize) -> f64 {
        match self {
            StepSchedule::Constant(eta) => *eta,
            StepSchedule::Sequence(steps) => steps[t],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockSelection {
    UniformRandom,
    /// Block `t mod b` at iteration `t` (0-based), starting with block 0.
    Cyclic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputIterate {
    /// `x⁽ᵗ⁾` with probability `η_t / Σ η_s`, `t ∈ 1..=T`.
    WeightedRandom,
    /// `x⁽ᵀ⁺¹⁾`
    Last,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub iterations: usize,
    pub schedule: StepSchedule,
    pub selection: BlockSelection,
    pub output: OutputIterate,
    pub seed: u64,
}

impl RunConfig {
    /// Uniform block sampling and a step-weighted random output iterate.
    pub fn theory(iterations: usize, step: f64, seed: u64) -> Self {
        Self {
            iterations,
            schedule: StepSchedule::Constant(step),
            selection: BlockSelection::UniformRandom,
            output: OutputIterate::WeightedRandom,
            seed,
        }
    }

    /// Cyclic blocks and the last iterate.
    pub fn practice(iterations: usize, step: f64, seed: u64) -> Self {
        Self {
            iterations,
            schedule: StepSchedule::Constant(step),
            selection: BlockSelection::Cyclic,
            output: OutputIterate::Last,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(invalid("iterations must be at least 1"));
        }
        match &self.schedule {
            StepSchedule::Constant(eta) if !(*eta > 0.0) || !eta.is_finite() => {
                Err(invalid(format!("step size must be positive, got {eta}")))
            }
            StepSchedule::Sequence(steps) => {
                if steps.len() != self.iterations {
                    return Err(invalid(format!(
                        "step sequence has {} entries for {} iterations",
                        steps.len(),
                        self.iterations
                    )));
                }
                if steps.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
                    return Err(invalid("step sizes must be positive"));
                }
                if steps.windows(2).any(|w| w[1] > w[0]) {
                    return Err(invalid("step sizes must be non-increasing"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Constants entering the iteration bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityConstants {
    /// Weak-convexity constant `γ = max_i γ_i`.
    pub gamma: f64,
    /// Per-block second-moment bounds `L_i²` (for two blocks, `G_w²` and `G_θ²`).
    pub second_moments: Vec<f64>,
    /// `f(x⁽¹⁾)`
    pub initial_value: f64,
    /// `f*`
    pub lower_bound: f64,
}

impl RegularityConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(invalid("gamma must be positive"));
        }
        if self.second_moments.is_empty() || self.second_moments.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
            return Err(invalid("second-moment bounds must be positive and finite"));
        }
        if !(self.initial_gap() > 0.0) {
            return Err(invalid("initial value must exceed the lower bound"));
        }
        Ok(())
    }

    /// `L² = Σ L_i²`
    pub fn total_second_moment(&self) -> f64 {
        self.second_moments.iter().sum()
    }

    /// `F = f(x⁽¹⁾) − f*`; equals `f(x⁽¹⁾)` for nonnegative objectives.
    pub fn initial_gap(&self) -> f64 {
        self.initial_value - self.lower_bound
    }

    pub fn blocks(&self) -> usize {
        self.second_moments.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheorySchedule {
    pub iterations: usize,
    pub step: f64,
}

/// `T = ⌈16γF(G_w² + G_θ²)/ε²⌉` and `η = √(4F / (γ(G_w² + G_θ²)T))`, the
/// iteration count and step size after which the random output iterate is
/// ε-stationary in expectation.
pub fn theory_schedule(constants: &RegularityConstants, eps: f64) -> Result<TheorySchedule> {
    if !(eps > 0.0) {
        return Err(invalid("epsilon must be positive"));
    }
    constants.validate()?;
    let gamma = constants.gamma;
    let f = constants.initial_gap();
    let g2 = constants.total_second_moment();
    let raw = 16.0 * gamma * f * g2 / (eps * eps);
    let iterations = (libm::ceil(raw - 1e-9 * raw) as usize).max(1);
    let step = libm::sqrt(4.0 * f / (gamma * g2 * iterations as f64));
    Ok(TheorySchedule { iterations, step })
}

/// Stochastic oracle calls `8γbL²(f⁽¹⁾ − f*)/ε²` sufficient for
/// `E Δ_{1/2γ} ≤ ε` with `b` blocks.
pub fn oracle_budget(constants: &RegularityConstants, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(invalid("epsilon must be positive"));
    }
    constants.validate()?;
    let b = constants.blocks() as f64;
    Ok(8.0 * constants.gamma * b * constants.total_second_moment() * constants.initial_gap() / (eps * eps))
}

/// Constant step `√(2b(f⁽¹⁾ − f*)/(γL²T))` for a fixed horizon `T`.
pub fn horizon_step(constants: &RegularityConstants, iterations: usize) -> Result<f64> {
    constants.validate()?;
    let b = constants.blocks() as f64;
    Ok(libm::sqrt(
        2.0 * b * constants.initial_gap() / (constants.gamma * constants.total_second_moment() * iterations as f64),
    ))
}

/// Expected-stationarity bound `2L√(2bγ(f⁽¹⁾ − f*)/T)` for [`horizon_step`].
pub fn horizon_bound(constants: &RegularityConstants, iterations: usize) -> Result<f64> {
    constants.validate()?;
    let b = constants.blocks() as f64;
    let l = libm::sqrt(constants.total_second_moment());
    Ok(2.0 * l * libm::sqrt(2.0 * b * constants.gamma * constants.initial_gap() / iterations as f64))
}

/// Block-stochastic mirror descent over any number of blocks.
///
/// Block choice at iteration `t` uses stream `(seed, Block, t)`, the gradient
/// oracle uses `(seed, Data, t)` and the output index `(seed, Output, 0)`,
/// so the data seen at `t` does not depend on which block was chosen.
pub fn run_multi_block<O: Objective + ?Sized>(
    objective: &O,
    init: &[Vec<f64>],
    cfg: &RunConfig,
    rules: &[UpdateRule],
) -> Result<RunRecord> {
    cfg.validate()?;
    let geometry = objective.geometry();
    check_rules(geometry, rules)?;
    geometry.check_feasible(init)?;

    let b = geometry.len();
    let steps: Vec<f64> = (0..cfg.iterations).map(|t| cfg.schedule.at(t)).collect();
    let output_index = match cfg.output {
        OutputIterate::WeightedRandom => {
            let mut rng = StreamRng::new(cfg.seed, StreamTag::Output, 0);
            rng.categorical(&steps) + 1
        }
        OutputIterate::Last => cfg.iterations + 1,
    };
    let track_entropy = geometry.blocks().iter().any(|g| g.dgf() == Dgf::NegEntropy);

    let mut record = RunRecord::new(cfg.seed);
    record.output_index = output_index;
    let mut x = init.to_vec();
    for (t, eta) in steps.iter().enumerate() {
        if t + 1 == output_index {
            record.output = x.clone();
        }
        let loss = objective.value(&x);
        if !loss.is_finite() {
            return Err(Error::Diverged { what: "loss", iteration: t + 1 });
        }
        let block = match cfg.selection {
            BlockSelection::UniformRandom => StreamRng::new(cfg.seed, StreamTag::Block, t as u64).below(b),
            BlockSelection::Cyclic => t % b,
        };
        let mut data = StreamRng::new(cfg.seed, StreamTag::Data, t as u64);
        let grad = objective.stochastic_gradient(&x, block, &mut data);
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { what: "gradient", iteration: t + 1 });
        }
        let rule = &rules[block];
        let dual = rule.geometry().dual_norm(&grad);
        x[block] = rule.step(&x[block], &grad, *eta)?;
        if x[block].iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { what: "iterate", iteration: t + 1 });
        }

        record.blocks.push(block as u32);
        record.iterate_hash.push(hash_blocks(&x));
        record.push(series::LOSS, loss);
        record.push(series::GRAD_DUAL_NORM, dual);
        record.push(series::STEP, *eta);
        if track_entropy {
            record.push(series::ENTROPY, simplex_entropy(geometry, &x)?);
        }
    }
    if output_index == cfg.iterations + 1 {
        record.output = x;
    }
    Ok(record)
}

/// Two blocks `(w, θ)`: the shared-weights/architecture special case.
pub fn run_two_block<O: Objective + ?Sized>(
    objective: &O,
    weights: &[f64],
    arch: &[f64],
    cfg: &RunConfig,
    rules: &[UpdateRule; 2],
) -> Result<RunRecord> {
    if objective.geometry().len() != 2 {
        return Err(invalid("run_two_block needs an objective with exactly two blocks"));
    }
    run_multi_block(objective, &[weights.to_vec(), arch.to_vec()], cfg, rules)
}

fn check_rules(geometry: &ProductGeometry, rules: &[UpdateRule]) -> Result<()> {
    if rules.len() != geometry.len() {
        return Err(Error::LengthMismatch { expected: geometry.len(), got: rules.len() });
    }
    for (i, (rule, block)) in rules.iter().zip(geometry.blocks()).enumerate() {
        // the rule may use its own distance, but must act on the same set
        if rule.geometry().dim() != block.dim() || rule.geometry().domain() != block.domain() {
            return Err(invalid(format!("update rule {i} does not act on the block's feasible set")));
        }
    }
    Ok(())
}

fn simplex_entropy(geometry: &ProductGeometry, x: &[Vec<f64>]) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for (g, xi) in geometry.blocks().iter().zip(x) {
        if g.dgf() != Dgf::NegEntropy {
            continue;
        }
        let ranges = g.simplices();
        let size = ranges[0].len();
        total += mean_row_entropy(xi, size)? * ranges.len() as f64;
        count += ranges.len();
    }
    Ok(total / count as f64)
}
