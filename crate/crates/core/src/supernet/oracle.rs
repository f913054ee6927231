//! Ground truth by exhaustive training of every discrete architecture.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{StreamRng, StreamTag};

use super::data::Dataset;
use super::forward::{init_weights, mixture_loss_and_grads};
use super::space::{DiscreteArchitecture, SearchSpace};

/// Largest number of architectures [`enumerate_oracle`] will train.
pub const ORACLE_LIMIT: u128 = 1 << 16;

/// Fixed training budget for a single discrete architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 40, batch_size: 16, lr: 0.05, weight_decay: 0.0, init_scale: 0.5, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleEntry {
    pub arch: DiscreteArchitecture,
    /// Full-data loss after training.
    pub loss: f64,
}

/// Minibatch SGD on the weights of `arch` alone. Starts from `init` when
/// given, otherwise from the seeded initialization shared by all
/// architectures. Returns the trained weights and the final full-data loss.
pub fn train_discrete(
    space: &SearchSpace,
    arch: &DiscreteArchitecture,
    data: &Dataset,
    cfg: &TrainConfig,
    init: Option<&[f64]>,
) -> Result<(Vec<f64>, f64)> {
    if arch.ops.len() != space.num_edges() || arch.ops.iter().any(|o| *o >= space.num_ops()) {
        return Err(invalid("architecture does not fit the search space"));
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 || !(cfg.lr >= 0.0) {
        return Err(invalid("training needs positive epochs and batch size and a nonnegative rate"));
    }
    if data.dim() != space.dim() {
        return Err(invalid("dataset dimension differs from the search space"));
    }
    let mix = arch.one_hot(space.num_ops());
    let mut w = match init {
        Some(w) => {
            crate::numerics::check_len(w, space.num_params())?;
            w.to_vec()
        }
        None => init_weights(space, cfg.init_scale, cfg.seed),
    };
    let mut order = data.indices();
    for epoch in 0..cfg.epochs {
        StreamRng::new(cfg.seed, StreamTag::Shuffle, epoch as u64).shuffle(&mut order);
        for batch in order.chunks(cfg.batch_size) {
            let lg = mixture_loss_and_grads(space, &w, &mix, data, batch, cfg.weight_decay)?;
            for (wi, g) in w.iter_mut().zip(&lg.grad_w) {
                *wi -= cfg.lr * g;
            }
        }
    }
    let loss = mixture_loss_and_grads(space, &w, &mix, data, &data.indices(), cfg.weight_decay)?.loss;
    Ok((w, loss))
}

/// Trains every architecture in the space with the same budget, seed and
/// initialization; returns them sorted by final loss (ties keep enumeration
/// order).
pub fn enumerate_oracle(space: &SearchSpace, data: &Dataset, cfg: &TrainConfig) -> Result<Vec<OracleEntry>> {
    let count = space.num_architectures();
    if count > ORACLE_LIMIT {
        return Err(Error::SpaceTooLarge { size: count, limit: ORACLE_LIMIT });
    }
    let mut out = Vec::with_capacity(count as usize);
    for index in 0..count {
        let arch = space.architecture(index);
        let (_, loss) = train_discrete(space, &arch, data, cfg, None)?;
        out.push(OracleEntry { arch, loss });
    }
    out.sort_by(|a, b| a.loss.total_cmp(&b.loss));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::supernet::{planted_task, Edge, OpKind};
    use alloc::vec;

    #[test]
    fn exact_op_family_ranks_first() {
        let ops = vec![OpKind::Identity, OpKind::Zero, OpKind::Softplus, OpKind::Diagonal];
        let space = SearchSpace::new(2, vec![Edge { to: 1, from: 0 }], ops, 2).unwrap();
        let arch = DiscreteArchitecture::new(vec![3]);
        let task = planted_task(&space, &arch, 64, 0.0, 2.0, 1).unwrap();
        let cfg = TrainConfig { epochs: 60, lr: 0.1, ..TrainConfig::default() };
        let ranking = enumerate_oracle(&space, &task.data, &cfg).unwrap();
        assert_eq!(ranking.len(), 4);
        assert_eq!(ranking[0].arch, arch);
        assert!(ranking[0].loss < 1e-8);
        assert!(ranking.windows(2).all(|p| p[0].loss <= p[1].loss));
        assert_eq!(ranking, enumerate_oracle(&space, &task.data, &cfg).unwrap());
    }

    #[test]
    fn isomorphic_architectures_tie() {
        // two parallel branches 0→1→3 and 0→2→3; swapping the branch ops is a relabelling
        let edges = vec![
            Edge { to: 1, from: 0 },
            Edge { to: 2, from: 0 },
            Edge { to: 3, from: 1 },
            Edge { to: 3, from: 2 },
        ];
        let ops = vec![OpKind::Identity, OpKind::Dense, OpKind::Softplus];
        let space = SearchSpace::new(4, edges, ops, 2).unwrap();
        let data = planted_task(&space, &DiscreteArchitecture::new(vec![1, 2, 1, 0]), 32, 0.1, 1.0, 2).unwrap().data;
        let a = DiscreteArchitecture::new(vec![1, 2, 0, 0]);
        let b = DiscreteArchitecture::new(vec![2, 1, 0, 0]);
        let cfg = TrainConfig { epochs: 10, ..TrainConfig::default() };
        let init_a = init_weights(&space, 1.0, 7);
        let mut init_b = init_a.clone();
        init_b[space.param_range(1, 1)].copy_from_slice(&init_a[space.param_range(0, 1)]);
        let (_, loss_a) = train_discrete(&space, &a, &data, &cfg, Some(&init_a)).unwrap();
        let (_, loss_b) = train_discrete(&space, &b, &data, &cfg, Some(&init_b)).unwrap();
        assert!((loss_a - loss_b).abs() <= 1e-9);
    }

    #[test]
    fn rejects_oversized_spaces() {
        let space = SearchSpace::dense(6, OpKind::DEFAULT.to_vec(), 1).unwrap();
        let data = Dataset::new(1, vec![1.0], vec![1.0]).unwrap();
        assert!(matches!(
            enumerate_oracle(&space, &data, &TrainConfig::default()),
            Err(Error::SpaceTooLarge { .. })
        ));
    }
}
