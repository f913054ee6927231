//! Benchmark objectives with known structure.
//!
//! * [`SimplexLinear`]: linear costs on the simplex, where exponentiated
//!   gradient needs `O(log k)` iterations and projected gradient descent
//!   `O(k)` with their classical step sizes.
//! * [`RwcBenchmark`]: a two-block nonconvex objective whose weak-convexity
//!   constant holds by construction.
//! * [`score`]: the score-function (REINFORCE) estimator over sampled
//!   discrete architectures.

use alloc::vec::Vec;

use crate::geometry::ProductGeometry;
use crate::numerics::StreamRng;

mod rwc;
pub mod score;
mod simplex_linear;

pub use rwc::{rwc_benchmark, RwcBenchmark, RwcParams};
pub use simplex_linear::{
    classical_step, iterations_to_suboptimality, planted_costs, simplex_linear, SimplexLinear,
    SimplexMethod,
};

/// A blockwise objective with full and stochastic gradient oracles.
///
/// Points are `&[Vec<f64>]` with one vector per block of [`geometry`].
/// Stochastic gradients draw all of their randomness from the supplied
/// stream so that runs are reproducible.
///
/// [`geometry`]: Objective::geometry
pub trait Objective {
    fn geometry(&self) -> &ProductGeometry;

    fn value(&self, x: &[Vec<f64>]) -> f64;

    /// Full gradient of the restriction to `block`.
    fn gradient(&self, x: &[Vec<f64>], block: usize) -> Vec<f64>;

    /// Unbiased stochastic estimate of [`Objective::gradient`].
    fn stochastic_gradient(&self, x: &[Vec<f64>], block: usize, rng: &mut StreamRng) -> Vec<f64>;

    /// Weak-convexity constant `γ` relative to the product DGF.
    fn gamma(&self) -> f64;

    /// A certified lower bound `f*` on the objective.
    fn lower_bound(&self) -> f64;

    /// Declared bounds `L_i²` on `E‖G_i‖_{i,*}²`, when known analytically.
    fn second_moment_bounds(&self) -> Option<Vec<f64>> {
        None
    }
}

impl<O: Objective + ?Sized> Objective for &O {
    fn geometry(&self) -> &ProductGeometry {
        (**self).geometry()
    }
    fn value(&self, x: &[Vec<f64>]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[Vec<f64>], block: usize) -> Vec<f64> {
        (**self).gradient(x, block)
    }
    fn stochastic_gradient(&self, x: &[Vec<f64>], block: usize, rng: &mut StreamRng) -> Vec<f64> {
        (**self).stochastic_gradient(x, block, rng)
    }
    fn gamma(&self) -> f64 {
        (**self).gamma()
    }
    fn lower_bound(&self) -> f64 {
        (**self).lower_bound()
    }
    fn second_moment_bounds(&self) -> Option<Vec<f64>> {
        (**self).second_moment_bounds()
    }
}

/// Monte Carlo estimate of `max_x E‖G_i(x)‖_{i,*}²` over the given points,
/// one entry per block.
pub fn estimate_second_moments<O: Objective + ?Sized>(
    objective: &O,
    points: &[Vec<Vec<f64>>],
    draws: usize,
    rng: &mut StreamRng,
) -> Vec<f64> {
    let geometry = objective.geometry();
    let mut out: Vec<f64> = alloc::vec![0.0; geometry.len()];
    for x in points {
        for (i, best) in out.iter_mut().enumerate() {
            let block = geometry.block(i);
            let mean = (0..draws)
                .map(|_| {
                    let n = block.dual_norm(&objective.stochastic_gradient(x, i, rng));
                    n * n
                })
                .sum::<f64>()
                / draws as f64;
            *best = f64::max(*best, mean);
        }
    }
    out
}

/// Full gradient of every block, concatenated.
pub fn full_gradient<O: Objective + ?Sized>(objective: &O, x: &[Vec<f64>]) -> Vec<f64> {
    (0..objective.geometry().len()).flat_map(|i| objective.gradient(x, i)).collect()
}

/// Splits a flat vector into blocks matching `geometry`.
pub fn split_blocks(geometry: &ProductGeometry, flat: &[f64]) -> Vec<Vec<f64>> {
    let mut start = 0;
    geometry
        .blocks()
        .iter()
        .map(|b| {
            let block = flat[start..start + b.dim()].to_vec();
            start += b.dim();
            block
        })
        .collect()
}
