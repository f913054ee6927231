//! Score-function gradients for the expected loss over sampled architectures.
//!
//! Gradients with respect to simplex-constrained weights are only defined up
//! to a constant per row, and exponentiated gradient ignores such constants.
//! Estimates here are reported in the centred form `g − ⟨θ, g⟩1` per edge,
//! which makes the score `e_a/θ_a − 1` mean-zero.

use alloc::vec;
use alloc::vec::Vec;

use crate::numerics::StreamRng;

/// One operation index per edge, drawn independently from each row.
pub fn sample_architecture(weights: &[f64], ops: usize, rng: &mut StreamRng) -> Vec<usize> {
    weights.chunks(ops).map(|row| rng.categorical(row)).collect()
}

/// Subtracts the `θ`-weighted mean of every row.
pub fn center_rows(grad: &mut [f64], weights: &[f64], ops: usize) {
    for (g, w) in grad.chunks_mut(ops).zip(weights.chunks(ops)) {
        let mean: f64 = g.iter().zip(w).map(|(a, b)| a * b).sum();
        for v in g {
            *v -= mean;
        }
    }
}

/// REINFORCE estimate of `∇_θ E_{a∼θ}[L(a)]` from `samples` draws.
///
/// `loss` receives the sampled architecture and may draw its own noise (e.g.
/// a minibatch) from state it captures.
pub fn score_function_gradient<F>(
    weights: &[f64],
    ops: usize,
    samples: usize,
    mut loss: F,
    rng: &mut StreamRng,
) -> Vec<f64>
where
    F: FnMut(&[usize]) -> f64,
{
    let mut grad = vec![0.0; weights.len()];
    for _ in 0..samples {
        let arch = sample_architecture(weights, ops, rng);
        let value = loss(&arch);
        for (e, op) in arch.iter().enumerate() {
            let row = e * ops;
            for o in 0..ops {
                grad[row + o] -= value;
            }
            grad[row + op] += value / weights[row + op];
        }
    }
    for g in &mut grad {
        *g /= samples as f64;
    }
    grad
}
