use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::geometry::{project_simplex, BlockGeometry, ProductGeometry};
use crate::mirror::{eg_step, euclidean_step};
use crate::numerics::{norm_inf, norm_l2, StreamRng};

use super::Objective;

/// `f(θ) = ⟨c, θ⟩` on the `k`-simplex.
#[derive(Debug, Clone)]
pub struct SimplexLinear {
    cost: Vec<f64>,
    geometry: ProductGeometry,
    noise: f64,
}

/// Linear objective with cost `c` on the `k`-simplex.
pub fn simplex_linear(k: usize, cost: Vec<f64>) -> Result<SimplexLinear> {
    if k < 2 {
        return Err(invalid("simplex_linear needs k >= 2"));
    }
    if cost.len() != k {
        return Err(crate::Error::LengthMismatch { expected: k, got: cost.len() });
    }
    crate::numerics::check_finite(&cost)?;
    let geometry = ProductGeometry::new(vec![BlockGeometry::entropic_simplex(k)])?;
    Ok(SimplexLinear { cost, geometry, noise: 0.0 })
}

impl SimplexLinear {
    /// Adds `N(0, σ²)` noise to every coordinate of the stochastic gradient.
    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise = sigma;
        self
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn dim(&self) -> usize {
        self.cost.len()
    }

    /// Optimal value `min_i c_i` and the lowest index attaining it.
    pub fn optimum(&self) -> (f64, usize) {
        let mut best = (self.cost[0], 0);
        for (i, c) in self.cost.iter().enumerate().skip(1) {
            if *c < best.0 {
                best = (*c, i);
            }
        }
        best
    }

    pub fn eval(&self, theta: &[f64]) -> f64 {
        self.cost.iter().zip(theta).map(|(c, t)| c * t).sum()
    }
}

impl Objective for SimplexLinear {
    fn geometry(&self) -> &ProductGeometry {
        &self.geometry
    }

    fn value(&self, x: &[Vec<f64>]) -> f64 {
        self.eval(&x[0])
    }

    fn gradient(&self, _x: &[Vec<f64>], _block: usize) -> Vec<f64> {
        self.cost.clone()
    }

    fn stochastic_gradient(&self, _x: &[Vec<f64>], _block: usize, rng: &mut StreamRng) -> Vec<f64> {
        if self.noise == 0.0 {
            return self.cost.clone();
        }
        self.cost.iter().map(|c| c + self.noise * rng.normal()).collect()
    }

    /// Linear, hence convex; any positive constant is valid.
    fn gamma(&self) -> f64 {
        1.0
    }

    fn lower_bound(&self) -> f64 {
        self.optimum().0
    }

    fn second_moment_bounds(&self) -> Option<Vec<f64>> {
        if self.noise > 0.0 {
            return None;
        }
        let g = norm_inf(&self.cost);
        Some(vec![g * g])
    }
}

/// Random costs with one planted optimal vertex: a uniformly chosen
/// coordinate costs 0 and every other coordinate is uniform on `[gap, 1]`.
pub fn planted_costs(k: usize, gap: f64, rng: &mut StreamRng) -> Vec<f64> {
    let best = rng.below(k);
    (0..k)
        .map(|i| if i == best { 0.0 } else { gap + (1.0 - gap) * rng.uniform() })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimplexMethod {
    ExponentiatedGradient,
    ProjectedGradient,
}

/// The step `ε / G²` from the standard mirror descent bound, with `G` the
/// gradient bound in the method's dual norm: `‖c‖∞` for EG, `‖c‖₂` for
/// projected gradient descent.
pub fn classical_step(method: SimplexMethod, cost: &[f64], eps: f64) -> f64 {
    let g = match method {
        SimplexMethod::ExponentiatedGradient => norm_inf(cost),
        SimplexMethod::ProjectedGradient => norm_l2(cost),
    };
    eps / (g * g)
}

/// Runs `method` from the uniform distribution with its classical step and
/// returns the first iteration count at which `f(θ_t) − f* ≤ eps`, or `None`
/// if that does not happen within `max_iter` steps.
pub fn iterations_to_suboptimality(
    problem: &SimplexLinear,
    method: SimplexMethod,
    eps: f64,
    max_iter: usize,
) -> Result<Option<usize>> {
    let k = problem.dim();
    let (best, _) = problem.optimum();
    let step = classical_step(method, problem.cost(), eps);
    let mut theta = vec![1.0 / k as f64; k];
    for t in 0..=max_iter {
        if problem.eval(&theta) - best <= eps {
            return Ok(Some(t));
        }
        theta = match method {
            SimplexMethod::ExponentiatedGradient => eg_step(&theta, problem.cost(), step)?,
            SimplexMethod::ProjectedGradient => project_simplex(&euclidean_step(&theta, problem.cost(), step)),
        };
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::StreamTag;

    #[test]
    fn optimum_examples() {
        let p = simplex_linear(3, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(p.optimum(), (1.0, 0));
        assert_eq!(p.lower_bound(), 1.0);

        // c = M e_j: optimum 0 anywhere else
        let p = simplex_linear(4, vec![0.0, 0.0, 5.0, 0.0]).unwrap();
        assert_eq!(p.optimum().0, 0.0);
        assert_ne!(p.optimum().1, 2);
        assert!(simplex_linear(1, vec![1.0]).is_err());
        assert!(simplex_linear(3, vec![1.0]).is_err());
    }

    #[test]
    fn optimum_matches_vertex_enumeration() {
        let mut rng = StreamRng::new(3, StreamTag::Problem, 0);
        for _ in 0..50 {
            let cost: Vec<f64> = (0..7).map(|_| rng.normal()).collect();
            let p = simplex_linear(7, cost).unwrap();
            let mut vertex = vec![0.0; 7];
            let mut enumerated = f64::INFINITY;
            for i in 0..7 {
                vertex.fill(0.0);
                vertex[i] = 1.0;
                enumerated = enumerated.min(p.eval(&vertex));
            }
            assert_eq!(p.optimum().0, enumerated);
        }
    }

    #[test]
    fn both_methods_reach_target() {
        let mut rng = StreamRng::new(5, StreamTag::Problem, 1);
        let p = simplex_linear(20, planted_costs(20, 0.5, &mut rng)).unwrap();
        for method in [SimplexMethod::ExponentiatedGradient, SimplexMethod::ProjectedGradient] {
            let t = iterations_to_suboptimality(&p, method, 0.05, 100_000).unwrap();
            assert!(t.is_some(), "{method:?}");
        }
    }

    #[test]
    fn planted_costs_have_a_unique_zero() {
        let mut rng = StreamRng::new(9, StreamTag::Problem, 0);
        let c = planted_costs(50, 0.5, &mut rng);
        assert_eq!(c.iter().filter(|v| **v == 0.0).count(), 1);
        assert!(c.iter().all(|v| *v == 0.0 || (0.5..=1.0).contains(v)));
    }
}
