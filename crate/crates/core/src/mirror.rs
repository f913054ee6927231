//! Single-block mirror descent updates.
//!
//! Every update solves `argmin_u η⟨g, u⟩ + D_φ(u‖x)` over the block's feasible
//! set. [`euclidean_step`] and [`eg_step`] are the closed forms for the two
//! supported distance-generating functions; [`generic_mirror_step`] can also
//! solve the problem numerically through the optimality conditions, which
//! serves as an independent check of the closed forms.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::arch::{ArchParams, Chart};
use crate::error::{invalid, Error, Result};
use crate::geometry::{project_simplex, BlockGeometry, Dgf, Domain, SIMPLEX_TOL};
use crate::numerics::{check_finite, check_len};

/// Lowest log-ratio to the largest coordinate an EG step may produce. Keeps
/// iterates strictly positive (e^-700 is still a normal double).
pub const MIN_LOG_RATIO: f64 = -700.0;

/// `x − ηg`
pub fn euclidean_step(x: &[f64], g: &[f64], eta: f64) -> Vec<f64> {
    x.iter().zip(g).map(|(xi, gi)| xi - eta * gi).collect()
}

/// Exponentiated gradient: `θ ⊙ exp(−ηg)` renormalized onto the simplex,
/// evaluated in log space.
pub fn eg_step(theta: &[f64], g: &[f64], eta: f64) -> Result<Vec<f64>> {
    check_len(g, theta.len())?;
    check_finite(g)?;
    check_strictly_positive_simplex(theta)?;
    Ok(eg_unchecked(theta, g, eta))
}

fn eg_unchecked(theta: &[f64], g: &[f64], eta: f64) -> Vec<f64> {
    // a constant tilt is removed by normalization; return θ bit-for-bit
    if g.iter().all(|gi| eta * gi == eta * g[0]) {
        return theta.to_vec();
    }
    let logits: Vec<f64> = theta.iter().zip(g).map(|(t, gi)| libm::log(*t) - eta * gi).collect();
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    let mut out: Vec<f64> = logits.iter().map(|l| libm::exp((l - max).max(MIN_LOG_RATIO))).collect();
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    out
}

fn check_strictly_positive_simplex(theta: &[f64]) -> Result<()> {
    check_finite(theta)?;
    if let Some(index) = theta.iter().position(|v| *v <= 0.0) {
        return Err(Error::ZeroEntry { index });
    }
    let sum: f64 = theta.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::Infeasible(format!("weights sum to {sum}")));
    }
    Ok(())
}

/// EG applied independently to every edge's row.
pub fn product_eg_step(theta: &ArchParams, grad: &[f64], eta: f64) -> Result<ArchParams> {
    if theta.chart() != Chart::Simplex {
        return Err(invalid("exponentiated gradient needs simplex-chart parameters"));
    }
    check_len(grad, theta.values().len())?;
    check_finite(grad)?;
    let ops = theta.ops();
    let mut next = Vec::with_capacity(grad.len());
    for (e, g) in grad.chunks(ops).enumerate() {
        let row = theta.row(e);
        check_strictly_positive_simplex(row).map_err(|err| match err {
            Error::ZeroEntry { index } => Error::ZeroEntry { index: e * ops + index },
            other => other,
        })?;
        next.extend(eg_unchecked(row, g, eta));
    }
    ArchParams::from_values(theta.edges(), ops, Chart::Simplex, next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMode {
    /// `x − ηg`, followed by Euclidean projection on simplex domains.
    ClosedFormEuclidean,
    /// Exponentiated gradient per simplex.
    ClosedFormEg,
    /// Numerical solve of the optimality conditions.
    Generic { tol: f64, max_iter: usize },
}

impl StepMode {
    pub const fn generic() -> Self {
        StepMode::Generic { tol: 1e-10, max_iter: 200 }
    }
}

/// A block's geometry, step size and solution method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRule {
    geometry: BlockGeometry,
    eta: f64,
    mode: StepMode,
}

impl UpdateRule {
    pub fn new(geometry: BlockGeometry, eta: f64, mode: StepMode) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(invalid(format!("step size must be positive and finite, got {eta}")));
        }
        match (mode, geometry.dgf()) {
            (StepMode::ClosedFormEuclidean, Dgf::NegEntropy) => {
                return Err(invalid("Euclidean closed form paired with an entropic geometry"))
            }
            (StepMode::ClosedFormEg, Dgf::SquaredEuclidean) => {
                return Err(invalid("EG closed form paired with a Euclidean geometry"))
            }
            (StepMode::Generic { tol, max_iter }, _) if !(tol > 0.0) || max_iter == 0 => {
                return Err(invalid("generic mode needs tol > 0 and max_iter > 0"))
            }
            _ => {}
        }
        Ok(Self { geometry, eta, mode })
    }

    /// Closed-form rule matching the geometry's DGF.
    pub fn closed_form(geometry: BlockGeometry, eta: f64) -> Result<Self> {
        let mode = match geometry.dgf() {
            Dgf::SquaredEuclidean => StepMode::ClosedFormEuclidean,
            Dgf::NegEntropy => StepMode::ClosedFormEg,
        };
        Self::new(geometry, eta, mode)
    }

    pub fn geometry(&self) -> &BlockGeometry {
        &self.geometry
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn mode(&self) -> StepMode {
        self.mode
    }

    pub fn apply(&self, x: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        self.step(x, g, self.eta)
    }

    /// Same rule with an externally scheduled step size.
    pub fn step(&self, x: &[f64], g: &[f64], eta: f64) -> Result<Vec<f64>> {
        check_len(x, self.geometry.dim())?;
        check_len(g, self.geometry.dim())?;
        check_finite(g)?;
        match self.mode {
            StepMode::ClosedFormEuclidean => {
                let mut u = euclidean_step(x, g, eta);
                for range in self.geometry.simplices() {
                    let projected = project_simplex(&u[range.clone()]);
                    u[range].copy_from_slice(&projected);
                }
                Ok(u)
            }
            StepMode::ClosedFormEg => {
                let mut u = Vec::with_capacity(x.len());
                for range in self.geometry.simplices() {
                    u.extend(eg_step(&x[range.clone()], &g[range], eta)?);
                }
                Ok(u)
            }
            StepMode::Generic { tol, max_iter } => {
                solve_mirror_subproblem(&self.geometry, x, g, eta, tol, max_iter)
            }
        }
    }
}

/// `argmin_u η⟨g, u⟩ + D_φ(u‖x)` with the method selected by `rule`.
pub fn generic_mirror_step(x: &[f64], g: &[f64], rule: &UpdateRule) -> Result<Vec<f64>> {
    rule.apply(x, g)
}

/// Solves the mirror subproblem from its optimality conditions.
///
/// Stationarity gives `∇φ(u_i) = ∇φ(x_i) − ηg_i − ν` with one multiplier `ν`
/// per simplex, clamped at the boundary for DGFs whose mirror map does not
/// keep iterates positive. The sum constraint `Σ u_i(ν) = 1` is monotone in
/// `ν`, so `ν` is found by bracketing and bisection until the constraint
/// residual is at most `tol`.
pub fn solve_mirror_subproblem(
    geometry: &BlockGeometry,
    x: &[f64],
    g: &[f64],
    eta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let mirror = geometry.dgf_grad(x)?;
    let dual: Vec<f64> = mirror.iter().zip(g).map(|(m, gi)| m - eta * gi).collect();
    if geometry.domain() == Domain::Unconstrained {
        return Ok(dual.iter().map(|y| geometry.dgf_grad_inverse(*y)).collect());
    }
    let lower = match geometry.dgf() {
        Dgf::SquaredEuclidean => 0.0,
        Dgf::NegEntropy => f64::MIN_POSITIVE,
    };
    let primal = |y: f64, nu: f64| geometry.dgf_grad_inverse(y - nu).max(lower);
    let mut u = Vec::with_capacity(x.len());
    for range in geometry.simplices() {
        let ys = &dual[range];
        let mass = |nu: f64| ys.iter().map(|y| primal(*y, nu)).sum::<f64>();
        let top = ys.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));

        // mass(nu) is non-increasing; bracket the root of mass(nu) = 1
        let mut width = 1.0;
        let mut lo = top - 1.0;
        let mut hi = top;
        let mut expansions = 0;
        while mass(lo) < 1.0 {
            lo -= width;
            width *= 2.0;
            expansions += 1;
            if expansions > 2000 {
                return Err(Error::NoConvergence { iterations: expansions, residual: 1.0 - mass(lo) });
            }
        }
        width = 1.0;
        while mass(hi) > 1.0 {
            hi += width;
            width *= 2.0;
            expansions += 1;
            if expansions > 2000 {
                return Err(Error::NoConvergence { iterations: expansions, residual: mass(hi) - 1.0 });
            }
        }

        let mut nu = 0.5 * (lo + hi);
        let mut residual = mass(nu) - 1.0;
        let mut iterations = 0;
        while residual.abs() > tol {
            if iterations == max_iter || hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
                return Err(Error::NoConvergence { iterations, residual: residual.abs() });
            }
            if residual > 0.0 {
                lo = nu;
            } else {
                hi = nu;
            }
            nu = 0.5 * (lo + hi);
            residual = mass(nu) - 1.0;
            iterations += 1;
        }
        u.extend(ys.iter().map(|y| primal(*y, nu)));
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_abs_diff_eq;

    #[test]
    fn euclidean_step_examples() {
        assert_eq!(euclidean_step(&[1.0, 1.0], &[1.0, -1.0], 0.5), vec![0.5, 1.5]);
        assert_eq!(euclidean_step(&[1.0, 2.0], &[0.0, 0.0], 0.3), vec![1.0, 2.0]);
        assert_eq!(euclidean_step(&[1.0, 2.0], &[4.0, 5.0], 0.0), vec![1.0, 2.0]);
    }

    #[test]
    fn eg_step_examples() {
        assert_eq!(eg_step(&[0.5, 0.5], &[0.0, 0.0], 1.0).unwrap(), vec![0.5, 0.5]);
        // 0.5·e^{-ln 4} : 0.5 → 1/4 : 1 → (0.2, 0.8)
        let out = eg_step(&[0.5, 0.5], &[libm::log(4.0), 0.0], 1.0).unwrap();
        assert_abs_diff_eq!(out[0], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], 0.8, epsilon = 1e-15);
        let theta = [0.1, 0.6, 0.3];
        let g = [0.4, -1.2, 2.0];
        let shifted: Vec<f64> = g.iter().map(|v| v + 7.3).collect();
        let a = eg_step(&theta, &g, 0.7).unwrap();
        let b = eg_step(&theta, &shifted, 0.7).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-15);
        }
    }

    #[test]
    fn eg_step_errors() {
        assert_eq!(eg_step(&[1.0, 0.0], &[0.0, 0.0], 1.0), Err(Error::ZeroEntry { index: 1 }));
        assert!(eg_step(&[0.5, 0.5], &[f64::NAN, 0.0], 1.0).is_err());
        assert!(eg_step(&[0.5, 0.5], &[0.0], 1.0).is_err());
    }

    #[test]
    fn eg_survives_huge_steps() {
        let out = eg_step(&[0.25; 4], &[10.0, -10.0, 3.0, 0.0], 100.0).unwrap();
        assert!(out.iter().all(|v| *v > 0.0));
        assert_abs_diff_eq!(out.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn generic_matches_closed_forms() {
        let rule = UpdateRule::new(BlockGeometry::euclidean(3), 0.3, StepMode::generic()).unwrap();
        let x = [0.2, -1.0, 4.0];
        let g = [1.5, 0.25, -2.0];
        assert_eq!(generic_mirror_step(&x, &g, &rule).unwrap(), euclidean_step(&x, &g, 0.3));

        let rule = UpdateRule::new(BlockGeometry::entropic_simplex(3), 0.8, StepMode::generic()).unwrap();
        let theta = [0.2, 0.5, 0.3];
        let got = generic_mirror_step(&theta, &g, &rule).unwrap();
        let want = eg_step(&theta, &g, 0.8).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }

        let rule = UpdateRule::new(BlockGeometry::entropic_simplex(3), 1e-12, StepMode::generic()).unwrap();
        let got = generic_mirror_step(&theta, &g, &rule).unwrap();
        for (a, b) in got.iter().zip(&theta) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn generic_euclidean_on_simplex_is_projection() {
        let geometry = BlockGeometry::euclidean_simplex(4);
        let x = [0.1, 0.2, 0.3, 0.4];
        let g = [3.0, -1.0, 0.5, 0.0];
        let generic = UpdateRule::new(geometry.clone(), 0.2, StepMode::generic()).unwrap();
        let closed = UpdateRule::closed_form(geometry, 0.2).unwrap();
        let a = generic.apply(&x, &g).unwrap();
        let b = closed.apply(&x, &g).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert_abs_diff_eq!(p, q, epsilon = 1e-9);
        }
    }

    #[test]
    fn product_eg_rowwise() {
        let theta = ArchParams::from_values(2, 2, Chart::Simplex, vec![0.5, 0.5, 0.25, 0.75]).unwrap();
        let unchanged = product_eg_step(&theta, &[0.0; 4], 2.0).unwrap();
        assert_eq!(unchanged, theta);

        // row 0: (0.5, 0.5) with g = (ln 4, 0) -> (0.2, 0.8)
        // row 1: (0.25, 0.75) with g = (0, ln 3) -> 0.25 : 0.25 -> (0.5, 0.5)
        let grad = [libm::log(4.0), 0.0, 0.0, libm::log(3.0)];
        let next = product_eg_step(&theta, &grad, 1.0).unwrap();
        let want = [0.2, 0.8, 0.5, 0.5];
        for (a, b) in next.values().iter().zip(&want) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }

        let single = ArchParams::from_values(1, 3, Chart::Simplex, vec![0.2, 0.3, 0.5]).unwrap();
        let g = [0.3, -0.7, 1.1];
        assert_eq!(product_eg_step(&single, &g, 0.9).unwrap().values(), eg_step(single.values(), &g, 0.9).unwrap());
    }

    #[test]
    fn rule_validation() {
        assert!(UpdateRule::new(BlockGeometry::euclidean(2), 0.0, StepMode::ClosedFormEuclidean).is_err());
        assert!(UpdateRule::new(BlockGeometry::euclidean(2), 0.1, StepMode::ClosedFormEg).is_err());
        assert!(UpdateRule::new(BlockGeometry::entropic_simplex(2), 0.1, StepMode::ClosedFormEuclidean).is_err());
    }
}
