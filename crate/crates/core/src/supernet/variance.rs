//! Variance of architecture-gradient estimators at equal sample budgets.
//!
//! The mixture estimator differentiates the relaxed loss on a minibatch of
//! `budget` points. The score-function estimator spends the same budget on
//! `budget` (architecture, point) draws. Both are centred per edge so that
//! neither carries a variance component that the simplex update ignores.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::arch::ArchParams;
use crate::error::{invalid, Result};
use crate::numerics::{StreamRng, StreamTag};
use crate::problems::score::{center_rows, score_function_gradient};

use super::data::Dataset;
use super::forward::{forward_discrete, mixture_loss_and_grads};
use super::space::{DiscreteArchitecture, SearchSpace};

/// Centred mixture-relaxation gradient on a minibatch.
pub fn mixture_gradient(
    space: &SearchSpace,
    data: &Dataset,
    w: &[f64],
    theta: &ArchParams,
    batch: &[usize],
) -> Result<Vec<f64>> {
    let mix = theta.weights();
    let mut g = mixture_loss_and_grads(space, w, &mix, data, batch, 0.0)?.grad_theta;
    center_rows(&mut g, &mix, space.num_ops());
    Ok(g)
}

/// Score-function gradient of `E_{a∼θ} ℓ(a)` with one data point per sampled
/// architecture.
pub fn score_gradient(
    space: &SearchSpace,
    data: &Dataset,
    w: &[f64],
    theta: &ArchParams,
    samples: usize,
    rng: &mut StreamRng,
    data_rng: &mut StreamRng,
) -> Result<Vec<f64>> {
    let mut failure = None;
    let g = score_function_gradient(
        &theta.weights(),
        space.num_ops(),
        samples,
        |arch| {
            let i = data_rng.below(data.len());
            let a = DiscreteArchitecture::new(arch.to_vec());
            match forward_discrete(space, w, &a, data.input(i)) {
                Ok(pred) => pred.iter().zip(data.target(i)).map(|(p, y)| 0.5 * (p - y) * (p - y)).sum(),
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        rng,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(g),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceComparison {
    /// Total variance `E‖ĝ − Eĝ‖²` of the score-function estimator.
    pub score: f64,
    pub mixture: f64,
    pub budget: usize,
    pub replicates: usize,
}

impl VarianceComparison {
    pub fn ratio(&self) -> f64 {
        self.score / self.mixture
    }
}

fn total_variance(samples: &[Vec<f64>]) -> f64 {
    let n = samples.len() as f64;
    let dim = samples[0].len();
    (0..dim)
        .map(|j| {
            let mean = samples.iter().map(|s| s[j]).sum::<f64>() / n;
            samples.iter().map(|s| (s[j] - mean) * (s[j] - mean)).sum::<f64>() / (n - 1.0)
        })
        .sum()
}

/// Empirical variances of both estimators at `(w, θ)` from `replicates`
/// independent estimates, each using `budget` samples.
pub fn gradient_variances(
    space: &SearchSpace,
    data: &Dataset,
    w: &[f64],
    theta: &ArchParams,
    budget: usize,
    replicates: usize,
    seed: u64,
) -> Result<VarianceComparison> {
    if budget == 0 || replicates < 2 {
        return Err(invalid("need a positive budget and at least two replicates"));
    }
    let mut score = Vec::with_capacity(replicates);
    let mut mixture = Vec::with_capacity(replicates);
    for r in 0..replicates as u64 {
        let mut data_rng = StreamRng::new(seed, StreamTag::Data, r);
        let batch: Vec<usize> = (0..budget).map(|_| data_rng.below(data.len())).collect();
        mixture.push(mixture_gradient(space, data, w, theta, &batch)?);
        let mut arch_rng = StreamRng::new(seed, StreamTag::Arch, r);
        let mut data_rng = StreamRng::new(seed, StreamTag::Replicate, r);
        score.push(score_gradient(space, data, w, theta, budget, &mut arch_rng, &mut data_rng)?);
    }
    Ok(VarianceComparison { score: total_variance(&score), mixture: total_variance(&mixture), budget, replicates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::Chart;
    use crate::supernet::{init_weights, planted_task, OpKind};
    use alloc::vec;

    #[test]
    fn total_variance_of_known_samples() {
        let s = vec![vec![1.0, 0.0], vec![3.0, 0.0], vec![2.0, 3.0]];
        // variances 1 and 3
        assert!((total_variance(&s) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn score_estimator_is_noisier_on_a_toy_supernet() {
        let space = SearchSpace::three_edge(OpKind::DEFAULT.to_vec(), 2).unwrap();
        let task = planted_task(&space, &DiscreteArchitecture::new(vec![2, 4, 3]), 128, 0.1, 1.0, 0).unwrap();
        let w = init_weights(&space, 1.0, 3);
        let theta = ArchParams::uniform(3, 5, Chart::Simplex);
        let v = gradient_variances(&space, &task.data, &w, &theta, 16, 200, 1).unwrap();
        assert!(v.ratio() > 1.0, "{v:?}");
    }

    #[test]
    fn full_batch_mixture_gradient_is_centred() {
        let space = SearchSpace::three_edge(OpKind::DEFAULT.to_vec(), 2).unwrap();
        let task = planted_task(&space, &DiscreteArchitecture::new(vec![0, 1, 2]), 8, 0.0, 1.0, 0).unwrap();
        let w = init_weights(&space, 1.0, 1);
        let theta = ArchParams::uniform(3, 5, Chart::Logits);
        let g = mixture_gradient(&space, &task.data, &w, &theta, &task.data.indices()).unwrap();
        for row in g.chunks(5) {
            assert!(row.iter().sum::<f64>().abs() < 1e-12);
        }
    }
}
