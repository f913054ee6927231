//! Norms, distance-generating functions and Bregman divergences.
//!
//! A [`BlockGeometry`] bundles a norm, a distance-generating function (DGF)
//! that is 1-strongly-convex with respect to that norm, and the feasible set
//! it lives on. [`ProductGeometry`] composes blocks with
//! `‖x‖² = Σ ‖x_i‖_i²` and `φ(x) = Σ φ_i(x_i)`.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{infeasible, invalid, Error, Result};
use crate::numerics::{check_len, norm_inf, norm_l1, norm_l2};

/// Sum tolerance for points on a simplex.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Floor applied inside logarithms by diagnostics only.
pub const LOG_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    L2,
    L1,
    /// `‖x‖₁ / √m`, the norm under which negative entropy on a product of `m`
    /// simplices is 1-strongly-convex.
    ScaledL1 { m: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dgf {
    /// `½‖u‖₂²`
    SquaredEuclidean,
    /// `Σ u_i log u_i`
    NegEntropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Unconstrained,
    Simplex,
    /// `count` consecutive simplices of `size` coordinates each.
    SimplexProduct { count: usize, size: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockGeometry {
    dim: usize,
    norm: NormKind,
    dgf: Dgf,
    domain: Domain,
}

impl BlockGeometry {
    pub fn new(dim: usize, norm: NormKind, dgf: Dgf, domain: Domain) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("block dimension must be positive"));
        }
        match domain {
            Domain::SimplexProduct { count, size } if count * size != dim || count == 0 => {
                return Err(invalid(format!(
                    "{count} simplices of size {size} do not tile dimension {dim}"
                )));
            }
            Domain::Unconstrained if dgf == Dgf::NegEntropy => {
                return Err(invalid("negative entropy needs a simplex domain"));
            }
            _ => {}
        }
        if let NormKind::ScaledL1 { m } = norm {
            if m == 0 {
                return Err(invalid("scaled l1 norm needs m >= 1"));
            }
        }
        Ok(Self { dim, norm, dgf, domain })
    }

    /// Unconstrained `ℝⁿ` with `½‖·‖₂²`.
    pub fn euclidean(dim: usize) -> Self {
        Self { dim, norm: NormKind::L2, dgf: Dgf::SquaredEuclidean, domain: Domain::Unconstrained }
    }

    /// Unit simplex with negative entropy, strongly convex w.r.t. `ℓ1`.
    pub fn entropic_simplex(k: usize) -> Self {
        Self { dim: k, norm: NormKind::L1, dgf: Dgf::NegEntropy, domain: Domain::Simplex }
    }

    /// Product of `m` simplices of size `k` with summed negative entropy and
    /// the norm `‖·‖₁/√m`.
    pub fn entropic_simplex_product(m: usize, k: usize) -> Self {
        Self {
            dim: m * k,
            norm: NormKind::ScaledL1 { m },
            dgf: Dgf::NegEntropy,
            domain: Domain::SimplexProduct { count: m, size: k },
        }
    }

    /// Unit simplex with `½‖·‖₂²`, i.e. Euclidean projected gradient descent.
    pub fn euclidean_simplex(k: usize) -> Self {
        Self { dim: k, norm: NormKind::L2, dgf: Dgf::SquaredEuclidean, domain: Domain::Simplex }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm_kind(&self) -> NormKind {
        self.norm
    }

    pub fn dgf(&self) -> Dgf {
        self.dgf
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Index ranges of the simplices making up the domain; empty when
    /// unconstrained.
    pub fn simplices(&self) -> Vec<Range<usize>> {
        match self.domain {
            Domain::Unconstrained => Vec::new(),
            Domain::Simplex => alloc::vec![0..self.dim],
            Domain::SimplexProduct { count, size } => {
                (0..count).map(|i| i * size..(i + 1) * size).collect()
            }
        }
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        match self.norm {
            NormKind::L2 => norm_l2(x),
            NormKind::L1 => norm_l1(x),
            NormKind::ScaledL1 { m } => norm_l1(x) / libm::sqrt(m as f64),
        }
    }

    pub fn dual_norm(&self, x: &[f64]) -> f64 {
        match self.norm {
            NormKind::L2 => norm_l2(x),
            NormKind::L1 => norm_inf(x),
            NormKind::ScaledL1 { m } => libm::sqrt(m as f64) * norm_inf(x),
        }
    }

    pub fn check_feasible(&self, x: &[f64]) -> Result<()> {
        check_len(x, self.dim)?;
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        for range in self.simplices() {
            let row = &x[range.clone()];
            if let Some(i) = row.iter().position(|v| *v < 0.0) {
                return Err(infeasible(format!("negative entry at {}", range.start + i)));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(infeasible(format!(
                    "simplex starting at {} sums to {sum}",
                    range.start
                )));
            }
        }
        Ok(())
    }

    pub fn dgf_value(&self, x: &[f64]) -> Result<f64> {
        self.check_feasible(x)?;
        Ok(match self.dgf {
            Dgf::SquaredEuclidean => 0.5 * x.iter().map(|v| v * v).sum::<f64>(),
            Dgf::NegEntropy => x.iter().map(|v| xlogx(*v)).sum(),
        })
    }

    /// Mirror map `∇φ(x)`. Negative entropy requires strictly positive `x`.
    pub fn dgf_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self.dgf {
            Dgf::SquaredEuclidean => Ok(x.to_vec()),
            Dgf::NegEntropy => x
                .iter()
                .enumerate()
                .map(|(index, v)| {
                    if *v > 0.0 {
                        Ok(libm::log(*v) + 1.0)
                    } else {
                        Err(Error::ZeroEntry { index })
                    }
                })
                .collect(),
        }
    }

    /// Inverse mirror map `(∇φ)⁻¹(y)` ignoring the domain constraint.
    pub(crate) fn dgf_grad_inverse(&self, y: f64) -> f64 {
        match self.dgf {
            Dgf::SquaredEuclidean => y,
            Dgf::NegEntropy => libm::exp(y - 1.0),
        }
    }

    /// `D_φ(u‖v) = φ(u) − φ(v) − ⟨∇φ(v), u − v⟩`.
    pub fn bregman(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        self.check_feasible(u)?;
        self.check_feasible(v)?;
        bregman_unchecked(self.dgf, u, v)
    }
}

/// Divergence without the feasibility check, for callers that already hold
/// feasible points (the prox solver evaluates it thousands of times).
pub(crate) fn bregman_unchecked(dgf: Dgf, u: &[f64], v: &[f64]) -> Result<f64> {
    match dgf {
        Dgf::SquaredEuclidean => {
            Ok(0.5 * u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        }
        Dgf::NegEntropy => {
            let mut total = 0.0;
            for (index, (a, b)) in u.iter().zip(v).enumerate() {
                if *b <= 0.0 {
                    return Err(Error::ZeroEntry { index });
                }
                // generalized KL: u log(u/v) − u + v
                let term = if *a > 0.0 { a * libm::log(a / b) } else { 0.0 };
                total += term - a + b;
            }
            Ok(total.max(0.0))
        }
    }
}

/// `x log x` with `0 log 0 = 0`.
pub fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * libm::log(x)
    } else {
        0.0
    }
}

/// Rescales a nonnegative vector onto the unit simplex. Entries in
/// `[-tol, 0)` are treated as rounding noise and clamped to zero.
pub fn simplex_check_and_renormalize(x: &[f64], tol: f64) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(infeasible("empty vector"));
    }
    let mut out = Vec::with_capacity(x.len());
    for (i, v) in x.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { index: i });
        }
        if *v < -tol {
            return Err(infeasible(format!("negative entry {v} at {i}")));
        }
        out.push(v.max(0.0));
    }
    let sum: f64 = out.iter().sum();
    if !(sum > 0.0) {
        return Err(infeasible("all entries are zero"));
    }
    for v in &mut out {
        *v /= sum;
    }
    Ok(out)
}

/// Shannon entropy `−Σ x_i ln x_i` (natural log) of a point on the simplex.
pub fn entropy(x: &[f64]) -> Result<f64> {
    BlockGeometry::entropic_simplex(x.len().max(1)).check_feasible(x)?;
    Ok(-x.iter().map(|v| xlogx(*v)).sum::<f64>())
}

/// Mean entropy over the rows of a row-major matrix with `cols` columns.
pub fn mean_row_entropy(values: &[f64], cols: usize) -> Result<f64> {
    let rows = values.len() / cols;
    let mut total = 0.0;
    for row in values.chunks(cols) {
        total += entropy(row)?;
    }
    Ok(total / rows as f64)
}

/// Exact Euclidean projection onto the unit simplex (sort-and-threshold).
pub fn project_simplex(x: &[f64]) -> Vec<f64> {
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (i, v) in sorted.iter().enumerate() {
        cumulative += v;
        let candidate = (cumulative - 1.0) / (i + 1) as f64;
        if v - candidate > 0.0 {
            tau = candidate;
        }
    }
    x.iter().map(|v| (v - tau).max(0.0)).collect()
}

/// Ordered list of block geometries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductGeometry {
    blocks: Vec<BlockGeometry>,
}

impl ProductGeometry {
    pub fn new(blocks: Vec<BlockGeometry>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(invalid("product geometry needs at least one block"));
        }
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[BlockGeometry] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &BlockGeometry {
        &self.blocks[i]
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(BlockGeometry::dim).sum()
    }

    fn check_shape(&self, x: &[Vec<f64>]) -> Result<()> {
        if x.len() != self.blocks.len() {
            return Err(Error::LengthMismatch { expected: self.blocks.len(), got: x.len() });
        }
        for (block, xi) in self.blocks.iter().zip(x) {
            check_len(xi, block.dim())?;
        }
        Ok(())
    }

    pub fn check_feasible(&self, x: &[Vec<f64>]) -> Result<()> {
        self.check_shape(x)?;
        self.blocks.iter().zip(x).try_for_each(|(g, xi)| g.check_feasible(xi))
    }

    /// `sqrt(Σ ‖x_i‖_i²)`
    pub fn norm(&self, x: &[Vec<f64>]) -> Result<f64> {
        self.check_shape(x)?;
        let sq: f64 = self.blocks.iter().zip(x).map(|(g, xi)| sq(g.norm(xi))).sum();
        Ok(libm::sqrt(sq))
    }

    /// `sqrt(Σ ‖x_i‖_{i,*}²)`
    pub fn dual_norm(&self, x: &[Vec<f64>]) -> Result<f64> {
        self.check_shape(x)?;
        let sq: f64 = self.blocks.iter().zip(x).map(|(g, xi)| sq(g.dual_norm(xi))).sum();
        Ok(libm::sqrt(sq))
    }

    pub fn dgf_value(&self, x: &[Vec<f64>]) -> Result<f64> {
        self.check_shape(x)?;
        self.blocks.iter().zip(x).map(|(g, xi)| g.dgf_value(xi)).sum()
    }

    pub fn bregman(&self, u: &[Vec<f64>], v: &[Vec<f64>]) -> Result<f64> {
        self.check_shape(u)?;
        self.check_shape(v)?;
        self.blocks.iter().zip(u.iter().zip(v)).map(|(g, (ui, vi))| g.bregman(ui, vi)).sum()
    }

    pub(crate) fn bregman_unchecked(&self, u: &[Vec<f64>], v: &[Vec<f64>]) -> Result<f64> {
        self.blocks
            .iter()
            .zip(u.iter().zip(v))
            .map(|(g, (ui, vi))| bregman_unchecked(g.dgf(), ui, vi))
            .sum()
    }
}

fn sq(x: f64) -> f64 {
    x * x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{StreamRng, StreamTag};
    use alloc::vec;
    use approx::assert_abs_diff_eq;

    fn random_simplex(rng: &mut StreamRng, k: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..k).map(|_| -libm::log(1.0 - rng.uniform())).collect();
        simplex_check_and_renormalize(&raw, 0.0).unwrap()
    }

    #[test]
    fn dgf_value_examples() {
        let e = BlockGeometry::euclidean(2);
        assert_abs_diff_eq!(e.dgf_value(&[3.0, 4.0]).unwrap(), 12.5);
        let s = BlockGeometry::entropic_simplex(2);
        assert_eq!(s.dgf_value(&[1.0, 0.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(s.dgf_value(&[0.5, 0.5]).unwrap(), -core::f64::consts::LN_2, epsilon = 1e-15);
        assert!(s.dgf_value(&[0.7, 0.7]).is_err());
    }

    #[test]
    fn bregman_examples() {
        let e = BlockGeometry::euclidean(2);
        assert_eq!(e.bregman(&[1.0, 2.0], &[0.0, 0.0]).unwrap(), 2.5);
        assert_eq!(e.bregman(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let s = BlockGeometry::entropic_simplex(2);
        // KL((.5,.5) || (.25,.75)) = .5 ln 2 + .5 ln(2/3)
        let kl = 0.5 * libm::log(2.0) + 0.5 * libm::log(2.0 / 3.0);
        assert_abs_diff_eq!(s.bregman(&[0.5, 0.5], &[0.25, 0.75]).unwrap(), kl, epsilon = 1e-15);
        assert_abs_diff_eq!(kl, 0.1438, epsilon = 1e-4);
        assert_eq!(s.bregman(&[0.5, 0.5], &[1.0, 0.0]), Err(Error::ZeroEntry { index: 1 }));
        // the first argument may sit on the boundary
        assert!(s.bregman(&[1.0, 0.0], &[0.5, 0.5]).is_ok());
    }

    #[test]
    fn dual_norm_examples() {
        assert_eq!(BlockGeometry::entropic_simplex(3).dual_norm(&[3.0, -7.0, 2.0]), 7.0);
        assert_eq!(BlockGeometry::euclidean(2).dual_norm(&[3.0, 4.0]), 5.0);
        let scaled = BlockGeometry::new(2, NormKind::ScaledL1 { m: 4 }, Dgf::SquaredEuclidean, Domain::Unconstrained)
            .unwrap();
        assert_eq!(scaled.dual_norm(&[1.0, -2.0]), 4.0);
    }

    #[test]
    fn product_norm_examples() {
        let pg = ProductGeometry::new(vec![
            BlockGeometry::euclidean(2),
            BlockGeometry::new(2, NormKind::L1, Dgf::SquaredEuclidean, Domain::Unconstrained).unwrap(),
        ])
        .unwrap();
        let x = vec![vec![3.0, 4.0], vec![1.0, -1.0]];
        assert_abs_diff_eq!(pg.norm(&x).unwrap(), libm::sqrt(29.0), epsilon = 1e-15);
        assert_eq!(pg.norm(&[vec![0.0; 2], vec![0.0; 2]]).unwrap(), 0.0);
        // dual: l2 then l_inf -> sqrt(25 + 1)
        assert_abs_diff_eq!(pg.dual_norm(&x).unwrap(), libm::sqrt(26.0), epsilon = 1e-15);
        let single = ProductGeometry::new(vec![BlockGeometry::euclidean(2)]).unwrap();
        assert_eq!(single.norm(&[vec![3.0, 4.0]]).unwrap(), 5.0);
        assert!(pg.norm(&[vec![1.0]]).is_err());
    }

    #[test]
    fn renormalize_examples() {
        assert_eq!(simplex_check_and_renormalize(&[2.0, 2.0], 0.0).unwrap(), vec![0.5, 0.5]);
        assert_eq!(simplex_check_and_renormalize(&[1.0, 0.0, 0.0], 0.0).unwrap(), vec![1.0, 0.0, 0.0]);
        let drift = [0.2, 0.3, 0.5000003];
        let fixed = simplex_check_and_renormalize(&drift, 0.0).unwrap();
        assert!((fixed.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        assert!(simplex_check_and_renormalize(&[0.0, 0.0], 0.0).is_err());
        assert!(simplex_check_and_renormalize(&[1.0, -0.5], 1e-12).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert_abs_diff_eq!(entropy(&[0.2; 5]).unwrap(), libm::log(5.0), epsilon = 1e-12);
        assert_eq!(entropy(&[0.0, 1.0, 0.0]).unwrap(), 0.0);
        // -(0.9 ln 0.9 + 0.1 ln 0.1)
        assert_abs_diff_eq!(entropy(&[0.9, 0.1]).unwrap(), 0.325_082_973_391_448_2, epsilon = 1e-12);
        assert!(entropy(&[0.5, 0.6]).is_err());
    }

    #[test]
    fn projection_lands_on_simplex() {
        assert_eq!(project_simplex(&[0.5, 0.5]), vec![0.5, 0.5]);
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_simplex(&[0.3, -1.0, 0.9, 0.4]);
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[2] - p[3], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn entropic_product_is_strongly_convex_in_scaled_l1() {
        let g = BlockGeometry::entropic_simplex_product(3, 4);
        let mut rng = StreamRng::new(11, StreamTag::Problem, 0);
        for _ in 0..500 {
            let x: Vec<f64> = (0..3).flat_map(|_| random_simplex(&mut rng, 4)).collect();
            let y: Vec<f64> = (0..3).flat_map(|_| random_simplex(&mut rng, 4)).collect();
            let d = g.bregman(&x, &y).unwrap();
            let n = g.norm(&crate::numerics::sub(&x, &y));
            assert!(d >= 0.5 * n * n - 1e-12);
        }
    }

    #[test]
    fn constructor_rejects_mismatched_domain() {
        assert!(BlockGeometry::new(5, NormKind::L1, Dgf::NegEntropy, Domain::SimplexProduct { count: 2, size: 3 }).is_err());
        assert!(BlockGeometry::new(3, NormKind::L1, Dgf::NegEntropy, Domain::Unconstrained).is_err());
    }

    #[test]
    fn conjugate_of_half_squared_norm_on_grid() {
        // sup_x <u,x> - ½‖x‖² over a grid against ½‖u‖_*²
        let pg = ProductGeometry::new(vec![
            BlockGeometry::new(2, NormKind::L1, Dgf::SquaredEuclidean, Domain::Unconstrained).unwrap(),
            BlockGeometry::euclidean(1),
        ])
        .unwrap();
        let u = vec![vec![0.7, -0.4], vec![0.5]];
        let target = 0.5 * sq(pg.dual_norm(&u).unwrap());
        let steps = 120;
        let span = 2.0;
        let grid = |i: usize| -span + 2.0 * span * i as f64 / steps as f64;
        let mut best = f64::NEG_INFINITY;
        for a in 0..=steps {
            for b in 0..=steps {
                for c in 0..=steps {
                    let x = vec![vec![grid(a), grid(b)], vec![grid(c)]];
                    let inner = u[0][0] * x[0][0] + u[0][1] * x[0][1] + u[1][0] * x[1][0];
                    best = best.max(inner - 0.5 * sq(pg.norm(&x).unwrap()));
                }
            }
        }
        assert!((best - target).abs() < 1e-2, "grid sup {best} vs {target}");
    }
}
