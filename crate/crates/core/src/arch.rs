//! Architecture parameters: one row of operation weights per edge.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, SIMPLEX_TOL};
use crate::numerics::softmax_rows;

/// How the stored values map to mixture weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chart {
    /// Values are the weights themselves; every row lies on the simplex.
    Simplex,
    /// Values are logits; weights are their row-wise softmax.
    Logits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchParams {
    edges: usize,
    ops: usize,
    chart: Chart,
    values: Vec<f64>,
}

impl ArchParams {
    /// Uniform weights: `1/|O|` per entry, or zero logits.
    pub fn uniform(edges: usize, ops: usize, chart: Chart) -> Self {
        let fill = match chart {
            Chart::Simplex => 1.0 / ops as f64,
            Chart::Logits => 0.0,
        };
        Self { edges, ops, chart, values: vec![fill; edges * ops] }
    }

    pub fn from_values(edges: usize, ops: usize, chart: Chart, values: Vec<f64>) -> Result<Self> {
        if values.len() != edges * ops {
            return Err(Error::LengthMismatch { expected: edges * ops, got: values.len() });
        }
        let params = Self { edges, ops, chart, values };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        crate::numerics::check_finite(&self.values)?;
        if self.chart == Chart::Simplex {
            for (e, row) in self.values.chunks(self.ops).enumerate() {
                if let Some(o) = row.iter().position(|v| *v <= 0.0) {
                    return Err(Error::ZeroEntry { index: e * self.ops + o });
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > SIMPLEX_TOL {
                    return Err(Error::Infeasible(alloc::format!("edge {e} weights sum to {sum}")));
                }
            }
        }
        Ok(())
    }

    pub fn edges(&self) -> usize {
        self.edges
    }

    pub fn ops(&self) -> usize {
        self.ops
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    /// Raw stored values (weights or logits), row-major.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn row(&self, edge: usize) -> &[f64] {
        &self.values[edge * self.ops..(edge + 1) * self.ops]
    }

    /// Mixture weights, row-major, every row on the simplex.
    pub fn weights(&self) -> Vec<f64> {
        match self.chart {
            Chart::Simplex => self.values.clone(),
            Chart::Logits => softmax_rows(&self.values, self.ops),
        }
    }

    /// Mean over edges of the natural-log entropy of each row's weights.
    pub fn mean_entropy(&self) -> f64 {
        let w = self.weights();
        let total: f64 = w
            .chunks(self.ops)
            .map(|row| -row.iter().map(|v| geometry::xlogx(*v)).sum::<f64>())
            .sum();
        total / self.edges as f64
    }
}
