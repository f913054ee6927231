//! Architecture search loops: GAEA and the softmax-logit baseline.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::arch::{ArchParams, Chart};
use crate::error::{invalid, Result};
use crate::mirror::product_eg_step;
use crate::numerics::{hash_blocks, norm_inf, norm_l2, StreamRng, StreamTag};
use crate::record::{series, RunRecord};

use super::data::Dataset;
use super::forward::{init_weights, loss_and_grads};
use super::space::{discretize, DiscreteArchitecture, SearchSpace};

/// Which loss drives the architecture update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    /// Weights and architecture both follow the training loss on all data.
    Single,
    /// Data is split in half; the architecture follows the validation half.
    Bilevel,
}

/// How weight and architecture steps interleave.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternation {
    /// One architecture step after every weight step.
    PerMinibatch,
    /// A full epoch of weight steps, then a full epoch of architecture steps.
    PerEpoch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_weights: f64,
    pub lr_arch: f64,
    /// Epochs of weight-only training before architecture updates start.
    pub warmup_epochs: usize,
    pub weight_decay: f64,
    pub level: Level,
    pub alternation: Alternation,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 16,
            lr_weights: 0.05,
            lr_arch: 0.1,
            warmup_epochs: 0,
            weight_decay: 0.0,
            level: Level::Single,
            alternation: Alternation::PerMinibatch,
            init_scale: 0.5,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(invalid("epochs and batch size must be positive"));
        }
        let rates = [self.lr_weights, self.lr_arch, self.weight_decay, self.init_scale];
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(invalid("learning rates, weight decay and init scale must be finite and nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    /// One entry per epoch: mean edge entropy, train and validation loss,
    /// mean gradient norms.
    pub record: RunRecord,
    pub weights: Vec<f64>,
    pub theta: ArchParams,
}

impl SearchOutcome {
    pub fn architecture(&self) -> DiscreteArchitecture {
        discretize(&self.theta)
    }
}

/// GAEA: SGD on the shared weights alternating with exponentiated gradient
/// on the simplex-chart architecture weights.
pub fn gaea_search(space: &SearchSpace, data: &Dataset, cfg: &SearchConfig) -> Result<SearchOutcome> {
    search(space, data, cfg, Chart::Simplex)
}

/// The same loop with `θ = softmax(z)` and plain SGD on the logits `z`.
pub fn baseline_softmax_search(space: &SearchSpace, data: &Dataset, cfg: &SearchConfig) -> Result<SearchOutcome> {
    search(space, data, cfg, Chart::Logits)
}

fn shuffled(items: &[usize], seed: u64, index: u64) -> Vec<usize> {
    let mut out = items.to_vec();
    StreamRng::new(seed, StreamTag::Shuffle, index).shuffle(&mut out);
    out
}

struct ArchStep<'a> {
    space: &'a SearchSpace,
    data: &'a Dataset,
    cfg: &'a SearchConfig,
    norm_sum: f64,
    count: usize,
}

impl ArchStep<'_> {
    fn apply(&mut self, w: &[f64], theta: &mut ArchParams, batch: &[usize]) -> Result<()> {
        let lg = loss_and_grads(self.space, w, theta, self.data, batch, self.cfg.weight_decay)?;
        let g = lg.grad_theta;
        match theta.chart() {
            Chart::Simplex => {
                // dual of ‖·‖₁/√m
                self.norm_sum += libm::sqrt(theta.edges() as f64) * norm_inf(&g);
                *theta = product_eg_step(theta, &g, self.cfg.lr_arch)?;
            }
            Chart::Logits => {
                self.norm_sum += norm_l2(&g);
                for (z, gi) in theta.values_mut().iter_mut().zip(&g) {
                    *z -= self.cfg.lr_arch * gi;
                }
            }
        }
        self.count += 1;
        Ok(())
    }
}

fn search(space: &SearchSpace, data: &Dataset, cfg: &SearchConfig, chart: Chart) -> Result<SearchOutcome> {
    cfg.validate()?;
    if data.dim() != space.dim() {
        return Err(invalid("dataset dimension differs from the search space"));
    }
    let all = data.indices();
    let (train, val) = match cfg.level {
        Level::Single => (all.clone(), all),
        Level::Bilevel => {
            if data.len() < 2 {
                return Err(invalid("bilevel search needs at least two samples"));
            }
            let perm = shuffled(&all, cfg.seed, 0);
            let (t, v) = perm.split_at(perm.len() / 2);
            (t.to_vec(), v.to_vec())
        }
    };

    let mut w = init_weights(space, cfg.init_scale, cfg.seed);
    let mut theta = ArchParams::uniform(space.num_edges(), space.num_ops(), chart);
    let mut record = RunRecord::new(cfg.seed);

    for epoch in 0..cfg.epochs {
        let arch_on = epoch >= cfg.warmup_epochs;
        let perm_w = shuffled(&train, cfg.seed, 2 * epoch as u64 + 1);
        let perm_a = shuffled(&val, cfg.seed, 2 * epoch as u64 + 2);
        let arch_batches: Vec<&[usize]> = perm_a.chunks(cfg.batch_size).collect();
        let mut arch = ArchStep { space, data, cfg, norm_sum: 0.0, count: 0 };
        let mut w_norm_sum = 0.0;
        let mut w_steps = 0;

        for (b, batch) in perm_w.chunks(cfg.batch_size).enumerate() {
            let lg = loss_and_grads(space, &w, &theta, data, batch, cfg.weight_decay)?;
            w_norm_sum += norm_l2(&lg.grad_w);
            w_steps += 1;
            for (wi, g) in w.iter_mut().zip(&lg.grad_w) {
                *wi -= cfg.lr_weights * g;
            }
            if arch_on && cfg.alternation == Alternation::PerMinibatch {
                arch.apply(&w, &mut theta, arch_batches[b % arch_batches.len()])?;
            }
        }
        if arch_on && cfg.alternation == Alternation::PerEpoch {
            for batch in &arch_batches {
                arch.apply(&w, &mut theta, batch)?;
            }
        }

        let train_loss = loss_and_grads(space, &w, &theta, data, &train, cfg.weight_decay)?.loss;
        let val_loss = match cfg.level {
            Level::Single => train_loss,
            Level::Bilevel => loss_and_grads(space, &w, &theta, data, &val, cfg.weight_decay)?.loss,
        };
        record.push(series::LOSS, train_loss);
        record.push(series::TRAIN_LOSS, train_loss);
        record.push(series::VAL_LOSS, val_loss);
        record.push(series::ENTROPY, theta.mean_entropy());
        record.push(series::GRAD_NORM_W, w_norm_sum / w_steps as f64);
        record.push(series::GRAD_NORM_THETA, if arch.count == 0 { 0.0 } else { arch.norm_sum / arch.count as f64 });
        record.iterate_hash.push(hash_blocks(&[w.clone(), theta.values().to_vec()]));
    }
    record.output_index = cfg.epochs + 1;
    record.output = vec![w.clone(), theta.values().to_vec()];
    Ok(SearchOutcome { record, weights: w, theta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::supernet::{planted_task, OpKind};

    fn toy() -> (SearchSpace, Dataset) {
        let space = SearchSpace::three_edge(OpKind::DEFAULT.to_vec(), 2).unwrap();
        let arch = DiscreteArchitecture::new(vec![2, 4, 3]);
        let task = planted_task(&space, &arch, 64, 0.05, 1.0, 11).unwrap();
        (space, task.data)
    }

    #[test]
    fn zero_arch_rate_keeps_theta_uniform() {
        let (space, data) = toy();
        let cfg = SearchConfig { epochs: 4, lr_arch: 0.0, ..SearchConfig::default() };
        let gaea = gaea_search(&space, &data, &cfg).unwrap();
        assert_eq!(gaea.theta, ArchParams::uniform(3, 5, Chart::Simplex));
        let log5 = libm::log(5.0);
        assert!(gaea.record.series(series::ENTROPY).unwrap().iter().all(|h| (h - log5).abs() < 1e-12));

        let base = baseline_softmax_search(&space, &data, &cfg).unwrap();
        assert_eq!(base.theta.values(), &[0.0; 15]);
        assert_eq!(base.theta.weights(), vec![0.2; 15]);
    }

    #[test]
    fn warmup_freezes_architecture() {
        let (space, data) = toy();
        let cfg = SearchConfig { epochs: 3, warmup_epochs: 2, lr_arch: 0.5, ..SearchConfig::default() };
        let out = gaea_search(&space, &data, &cfg).unwrap();
        let h = out.record.series(series::ENTROPY).unwrap();
        let log5 = libm::log(5.0);
        assert!(h[..2].iter().all(|v| (v - log5).abs() < 1e-12));
        assert!(h[2] < log5);
        assert_eq!(out.record.series(series::GRAD_NORM_THETA).unwrap()[..2], [0.0, 0.0]);
    }

    #[test]
    fn runs_are_deterministic_and_seed_dependent() {
        let (space, data) = toy();
        for level in [Level::Single, Level::Bilevel] {
            for alternation in [Alternation::PerMinibatch, Alternation::PerEpoch] {
                let cfg = SearchConfig { epochs: 3, level, alternation, seed: 4, ..SearchConfig::default() };
                let a = gaea_search(&space, &data, &cfg).unwrap();
                let b = gaea_search(&space, &data, &cfg).unwrap();
                assert_eq!(a, b);
                assert_eq!(a.record.len(), 3);
                let c = gaea_search(&space, &data, &SearchConfig { seed: 5, ..cfg }).unwrap();
                assert_ne!(a.record.iterate_hash, c.record.iterate_hash);
            }
        }
    }

    #[test]
    fn search_reduces_training_loss() {
        let (space, data) = toy();
        let cfg = SearchConfig { epochs: 20, ..SearchConfig::default() };
        let out = gaea_search(&space, &data, &cfg).unwrap();
        let loss = out.record.series(series::TRAIN_LOSS).unwrap();
        assert!(loss[19] < loss[0]);
    }

    #[test]
    fn rejects_bad_config() {
        let (space, data) = toy();
        assert!(gaea_search(&space, &data, &SearchConfig { epochs: 0, ..SearchConfig::default() }).is_err());
        assert!(gaea_search(&space, &data, &SearchConfig { lr_arch: -1.0, ..SearchConfig::default() }).is_err());
    }
}
