//! Bregman proximal operator and Bregman stationarity.
//!
//! `prox_λ(x) = argmin_u λf(u) + D(u‖x)` and
//! `Δ_λ(x) = (D(x‖prox_λ(x)) + D(prox_λ(x)‖x)) / λ²`, with `D` the Bregman
//! divergence of the objective's product DGF. `Δ_λ` vanishes exactly at
//! fixed points of the prox and is the convergence measure for
//! block-stochastic mirror descent on relatively weakly convex objectives.
//!
//! Stationarity is a measurement: it uses full gradients and is evaluated on
//! recorded iterates after a run, never inside the optimization loop.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mirror::UpdateRule;
use crate::problems::Objective;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxConfig {
    pub lambda: f64,
    /// Iteration cap; `None` means [`default_max_iter`] of the total dimension.
    pub max_iter: Option<usize>,
    /// Bound on the prox residual `‖u⁺ − u‖ / s` at termination.
    pub tol: f64,
}

impl ProxConfig {
    /// `λ = 1/(2γ)`
    pub fn for_gamma(gamma: f64) -> Self {
        Self { lambda: 0.5 / gamma, max_iter: None, tol: 1e-8 }
    }

    pub fn with_lambda(lambda: f64) -> Self {
        Self { lambda, max_iter: None, tol: 1e-8 }
    }

    fn validate(&self, gamma: f64) -> Result<()> {
        if !(self.lambda > 0.0) || !(self.tol > 0.0) {
            return Err(invalid("lambda and tol must be positive"));
        }
        // λf + D(·‖x) is strongly convex relative to φ only when λγ < 1
        if self.lambda * gamma >= 1.0 {
            return Err(invalid(format!("lambda {} must be below 1/gamma = {}", self.lambda, 1.0 / gamma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxSolution {
    pub point: Vec<Vec<f64>>,
    pub iterations: usize,
    pub residual: f64,
}

/// Approximates `prox_λ(x)` by full-gradient mirror descent on the prox
/// objective `h(u) = λf(u) + D(u‖x)`, with backtracking on the relative
/// smoothness inequality `h(u⁺) ≤ h(u) + ⟨∇h(u), u⁺ − u⟩ + D(u⁺‖u)/s`.
pub fn bregman_prox<O: Objective + ?Sized>(
    objective: &O,
    x: &[Vec<f64>],
    cfg: &ProxConfig,
) -> Result<ProxSolution> {
    cfg.validate(objective.gamma())?;
    let geometry = objective.geometry();
    geometry.check_feasible(x)?;
    let lambda = cfg.lambda;
    let max_iter = cfg.max_iter.unwrap_or(default_max_iter(geometry.total_dim()));
    let rules: Vec<UpdateRule> = geometry
        .blocks()
        .iter()
        .map(|g| UpdateRule::closed_form(g.clone(), 1.0))
        .collect::<Result<_>>()?;
    let anchor_mirror: Vec<Vec<f64>> =
        geometry.blocks().iter().zip(x).map(|(g, xi)| g.dgf_grad(xi)).collect::<Result<_>>()?;

    let prox_value = |u: &[Vec<f64>]| -> Result<f64> {
        Ok(lambda * objective.value(u) + geometry.bregman_unchecked(u, x)?)
    };

    let mut u = x.to_vec();
    let mut step: f64 = 1.0;
    let mut residual = f64::INFINITY;
    for iteration in 1..=max_iter {
        let h = prox_value(&u)?;
        let grad: Vec<Vec<f64>> = (0..geometry.len())
            .map(|i| {
                let mirror = geometry.block(i).dgf_grad(&u[i])?;
                Ok(objective
                    .gradient(&u, i)
                    .iter()
                    .zip(mirror.iter().zip(&anchor_mirror[i]))
                    .map(|(g, (m, a))| lambda * g + m - a)
                    .collect())
            })
            .collect::<Result<_>>()?;

        // recover from earlier backtracking, never beyond the unit step
        step = (2.0 * step).min(1.0);
        let next = loop {
            let candidate: Vec<Vec<f64>> = rules
                .iter()
                .zip(u.iter().zip(&grad))
                .map(|(rule, (ui, gi))| rule.step(ui, gi, step))
                .collect::<Result<_>>()?;
            let linear: f64 = grad
                .iter()
                .zip(candidate.iter().zip(&u))
                .flat_map(|(g, (c, ui))| g.iter().zip(c.iter().zip(ui)).map(|(gk, (ck, uk))| gk * (ck - uk)))
                .sum();
            let model = h + linear + geometry.bregman_unchecked(&candidate, &u)? / step;
            let slack = 1e-12 * (1.0 + h.abs());
            if prox_value(&candidate)? <= model + slack || step < 1e-12 {
                break candidate;
            }
            step *= 0.5;
        };

        let moved: Vec<Vec<f64>> =
            next.iter().zip(&u).map(|(a, b)| a.iter().zip(b).map(|(p, q)| p - q).collect()).collect();
        residual = geometry.norm(&moved)? / step;
        u = next;
        if !residual.is_finite() {
            return Err(Error::Diverged { what: "prox iterate", iteration });
        }
        if residual <= cfg.tol {
            return Ok(ProxSolution { point: u, iterations: iteration, residual });
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual })
}

/// `10·dim` iterations, but never fewer than 500: tiny problems otherwise
/// stop before the residual reaches the tolerance.
pub fn default_max_iter(dim: usize) -> usize {
    (10 * dim).max(500)
}

/// `Δ_λ(x)`; nonnegative, zero exactly at fixed points of the prox.
pub fn bregman_stationarity<O: Objective + ?Sized>(
    objective: &O,
    x: &[Vec<f64>],
    cfg: &ProxConfig,
) -> Result<f64> {
    let prox = bregman_prox(objective, x, cfg)?;
    let geometry = objective.geometry();
    let forward = geometry.bregman_unchecked(x, &prox.point)?;
    let backward = geometry.bregman_unchecked(&prox.point, x)?;
    Ok((forward + backward) / (cfg.lambda * cfg.lambda))
}
