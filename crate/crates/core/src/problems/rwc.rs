//! A nonconvex two-block objective with a certified weak-convexity constant.
//!
//! `f(w, θ) = ½(z − c)ᵀA(z − c) + Σ_j a_j (cos(⟨v_j, z⟩ + φ_j) + 1)` with
//! `z = (w, θ)`, `A` positive definite and `Σ_j a_j‖v_j‖² = ργ`, `ρ ≤ 1`.
//! The cosine sum has Hessian `⪰ −ργ I`, and on the simplex the entropy has
//! Hessian `⪰ I`, so `f + γ(½‖w‖² + Σθ log θ)` is convex. Every term is
//! nonnegative, which certifies `f* ≥ 0`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{simplex_check_and_renormalize, BlockGeometry, ProductGeometry};
use crate::numerics::{dot, norm_l2, StreamRng, StreamTag};

use super::Objective;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RwcParams {
    pub w_dim: usize,
    /// Size of the simplex block; 0 drops the block entirely.
    pub simplex_size: usize,
    pub gamma: f64,
    /// Fraction `ρ ∈ [0, 1]` of `γ` spent on the nonconvex perturbation.
    pub perturbation: f64,
    pub terms: usize,
    /// Eigenvalue range of the quadratic's Hessian.
    pub curvature: (f64, f64),
    pub w_noise: f64,
    pub theta_noise: f64,
    pub seed: u64,
}

impl Default for RwcParams {
    fn default() -> Self {
        Self {
            w_dim: 4,
            simplex_size: 4,
            gamma: 1.0,
            perturbation: 1.0,
            terms: 3,
            curvature: (0.5, 1.5),
            w_noise: 1.0,
            theta_noise: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
struct Cosine {
    amplitude: f64,
    direction: Vec<f64>,
    phase: f64,
}

#[derive(Debug, Clone)]
pub struct RwcBenchmark {
    params: RwcParams,
    geometry: ProductGeometry,
    hessian: Vec<f64>,
    center: Vec<f64>,
    cosines: Vec<Cosine>,
}

/// Shorthand for [`RwcBenchmark::new`] with default noise and curvature.
pub fn rwc_benchmark(w_dim: usize, simplex_size: usize, gamma: f64, seed: u64) -> Result<RwcBenchmark> {
    RwcBenchmark::new(RwcParams { w_dim, simplex_size, gamma, seed, ..RwcParams::default() })
}

impl RwcBenchmark {
    pub fn new(params: RwcParams) -> Result<Self> {
        if !(params.gamma > 0.0) {
            return Err(invalid("gamma must be positive"));
        }
        if !(0.0..=1.0).contains(&params.perturbation) {
            return Err(invalid("perturbation fraction must lie in [0, 1]"));
        }
        if params.w_dim == 0 {
            return Err(invalid("w_dim must be positive"));
        }
        if params.simplex_size == 1 {
            return Err(invalid("a simplex block needs at least 2 coordinates"));
        }
        let (lo, hi) = params.curvature;
        if !(lo > 0.0 && hi >= lo) {
            return Err(invalid("curvature range must satisfy 0 < lo <= hi"));
        }

        let mut blocks = vec![BlockGeometry::euclidean(params.w_dim)];
        if params.simplex_size > 0 {
            blocks.push(BlockGeometry::entropic_simplex(params.simplex_size));
        }
        let geometry = ProductGeometry::new(blocks)?;
        let n = params.w_dim + params.simplex_size;
        let mut rng = StreamRng::new(params.seed, StreamTag::Problem, 0);

        let basis = random_orthonormal(n, &mut rng);
        let eigen: Vec<f64> = (0..n).map(|_| lo + (hi - lo) * rng.uniform()).collect();
        let mut hessian = vec![0.0; n * n];
        for (k, lambda) in eigen.iter().enumerate() {
            let q = &basis[k];
            for i in 0..n {
                for j in 0..n {
                    hessian[i * n + j] += lambda * q[i] * q[j];
                }
            }
        }

        let mut center: Vec<f64> = (0..params.w_dim).map(|_| rng.normal()).collect();
        if params.simplex_size > 0 {
            let raw: Vec<f64> = (0..params.simplex_size).map(|_| 0.5 + rng.uniform()).collect();
            center.extend(simplex_check_and_renormalize(&raw, 0.0)?);
        }

        let budget = params.perturbation * params.gamma;
        let terms = if budget > 0.0 { params.terms } else { 0 };
        let cosines = (0..terms)
            .map(|_| {
                let direction: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
                let sq: f64 = direction.iter().map(|v| v * v).sum();
                Cosine {
                    amplitude: budget / (terms as f64 * sq),
                    direction,
                    phase: core::f64::consts::TAU * rng.uniform(),
                }
            })
            .collect();

        Ok(Self { params, geometry, hessian, center, cosines })
    }

    pub fn params(&self) -> &RwcParams {
        &self.params
    }

    /// Centre of the quadratic. With no perturbation it is the minimizer.
    pub fn center(&self) -> Vec<Vec<f64>> {
        super::split_blocks(&self.geometry, &self.center)
    }

    /// `w = 0`, `θ` uniform.
    pub fn default_init(&self) -> Vec<Vec<f64>> {
        let mut x = vec![vec![0.0; self.params.w_dim]];
        if self.params.simplex_size > 0 {
            x.push(vec![1.0 / self.params.simplex_size as f64; self.params.simplex_size]);
        }
        x
    }

    /// Points for measuring gradient moments: `w` uniform in the ball around
    /// the centre containing the default init scaled by `radius_factor`, `θ`
    /// drawn uniformly from the simplex.
    pub fn sample_region(&self, count: usize, radius_factor: f64, rng: &mut StreamRng) -> Vec<Vec<Vec<f64>>> {
        let center = self.center();
        let init = self.default_init();
        let radius = radius_factor * norm_l2(&crate::numerics::sub(&init[0], &center[0])).max(1.0);
        let d = self.params.w_dim;
        (0..count)
            .map(|_| {
                let dir: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
                let len = norm_l2(&dir).max(f64::MIN_POSITIVE);
                let r = radius * libm::pow(rng.uniform(), 1.0 / d as f64);
                let w = center[0].iter().zip(&dir).map(|(c, v)| c + r * v / len).collect();
                let mut x = vec![w];
                if self.params.simplex_size > 0 {
                    let raw: Vec<f64> =
                        (0..self.params.simplex_size).map(|_| -libm::log(1.0 - rng.uniform())).collect();
                    x.push(simplex_check_and_renormalize(&raw, 0.0).expect("exponential draws are positive"));
                }
                x
            })
            .collect()
    }

    fn joint(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter().flatten().copied().collect()
    }

    fn joint_gradient(&self, z: &[f64]) -> Vec<f64> {
        let n = z.len();
        let diff: Vec<f64> = z.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let mut g: Vec<f64> = (0..n)
            .map(|i| self.hessian[i * n..(i + 1) * n].iter().zip(&diff).map(|(h, d)| h * d).sum())
            .collect();
        for c in &self.cosines {
            let arg = dot(&c.direction, z).expect("dimensions agree") + c.phase;
            let scale = -c.amplitude * libm::sin(arg);
            for (gi, vi) in g.iter_mut().zip(&c.direction) {
                *gi += scale * vi;
            }
        }
        g
    }

    fn block_range(&self, block: usize) -> core::ops::Range<usize> {
        if block == 0 {
            0..self.params.w_dim
        } else {
            self.params.w_dim..self.params.w_dim + self.params.simplex_size
        }
    }
}

impl Objective for RwcBenchmark {
    fn geometry(&self) -> &ProductGeometry {
        &self.geometry
    }

    fn value(&self, x: &[Vec<f64>]) -> f64 {
        let z = self.joint(x);
        let n = z.len();
        let diff: Vec<f64> = z.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let mut quad = 0.0;
        for i in 0..n {
            let row: f64 = self.hessian[i * n..(i + 1) * n].iter().zip(&diff).map(|(h, d)| h * d).sum();
            quad += diff[i] * row;
        }
        let wave: f64 = self
            .cosines
            .iter()
            .map(|c| c.amplitude * (libm::cos(dot(&c.direction, &z).expect("dimensions agree") + c.phase) + 1.0))
            .sum();
        0.5 * quad + wave
    }

    fn gradient(&self, x: &[Vec<f64>], block: usize) -> Vec<f64> {
        let g = self.joint_gradient(&self.joint(x));
        g[self.block_range(block)].to_vec()
    }

    fn stochastic_gradient(&self, x: &[Vec<f64>], block: usize, rng: &mut StreamRng) -> Vec<f64> {
        let sigma = if block == 0 { self.params.w_noise } else { self.params.theta_noise };
        let mut g = self.gradient(x, block);
        if sigma > 0.0 {
            for v in &mut g {
                *v += sigma * rng.normal();
            }
        }
        g
    }

    fn gamma(&self) -> f64 {
        self.params.gamma
    }

    fn lower_bound(&self) -> f64 {
        0.0
    }
}

fn random_orthonormal(n: usize, rng: &mut StreamRng) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        for q in &basis {
            let p = dot(q, &v).expect("dimensions agree");
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= p * qi;
            }
        }
        let len = norm_l2(&v);
        if len > 1e-8 {
            basis.push(v.iter().map(|x| x / len).collect());
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Dgf;
    use crate::numerics::finite_diff_grad;

    #[test]
    fn gradients_match_finite_differences() {
        let p = rwc_benchmark(3, 4, 1.0, 7).unwrap();
        let mut rng = StreamRng::new(1, StreamTag::Problem, 5);
        for x in p.sample_region(20, 1.0, &mut rng) {
            for block in 0..2 {
                let analytic = p.gradient(&x, block);
                let numeric = finite_diff_grad(
                    |v| {
                        let mut y = x.clone();
                        y[block] = v.to_vec();
                        p.value(&y)
                    },
                    &x[block],
                    1e-5,
                )
                .unwrap();
                assert!(crate::numerics::relative_error(&analytic, &numeric, 1e-8) < 1e-6);
            }
        }
    }

    #[test]
    fn one_dimensional_curvature_bounded_below() {
        // second differences of a 1-D instance on a dense grid
        let gamma = 0.8;
        let p = RwcBenchmark::new(RwcParams {
            w_dim: 1,
            simplex_size: 0,
            gamma,
            curvature: (0.1, 0.1),
            seed: 3,
            ..RwcParams::default()
        })
        .unwrap();
        let h = 1e-3;
        let f = |w: f64| p.value(&[vec![w]]);
        let mut lowest = f64::INFINITY;
        let mut w = -20.0;
        while w <= 20.0 {
            let second = (f(w + h) - 2.0 * f(w) + f(w - h)) / (h * h);
            lowest = lowest.min(second);
            w += 0.01;
        }
        assert!(lowest >= -gamma - 1e-4, "curvature {lowest}");
        // the quadratic alone has curvature 0.1, so the instance is genuinely nonconvex
        assert!(lowest < 0.0);
    }

    #[test]
    fn relative_weak_convexity_midpoint_test() {
        let p = rwc_benchmark(3, 4, 1.0, 11).unwrap();
        let g = p.geometry().clone();
        let gamma = p.gamma();
        let phi = |x: &[Vec<f64>]| g.dgf_value(x).unwrap();
        let h = |x: &[Vec<f64>]| p.value(x) + gamma * phi(x);
        let mut rng = StreamRng::new(2, StreamTag::Problem, 9);
        let points = p.sample_region(200, 3.0, &mut rng);
        let mut checked = 0;
        for a in &points {
            for b in points.iter().take(50) {
                let mid: Vec<Vec<f64>> = a
                    .iter()
                    .zip(b)
                    .map(|(u, v)| u.iter().zip(v).map(|(x, y)| 0.5 * (x + y)).collect())
                    .collect();
                assert!(h(&mid) <= 0.5 * (h(a) + h(b)) + 1e-10);
                checked += 1;
            }
        }
        assert_eq!(checked, 10_000);
        assert_eq!(g.block(1).dgf(), Dgf::NegEntropy);
    }

    #[test]
    fn unperturbed_minimizer_is_center() {
        let p = RwcBenchmark::new(RwcParams { perturbation: 0.0, seed: 4, ..RwcParams::default() }).unwrap();
        let c = p.center();
        assert!(p.value(&c).abs() < 1e-15);
        for block in 0..2 {
            assert!(norm_l2(&p.gradient(&c, block)) < 1e-12);
        }
    }

    #[test]
    fn value_is_nonnegative() {
        let p = rwc_benchmark(2, 3, 2.0, 5).unwrap();
        let mut rng = StreamRng::new(8, StreamTag::Problem, 0);
        for x in p.sample_region(500, 4.0, &mut rng) {
            assert!(p.value(&x) >= p.lower_bound());
        }
    }
}
