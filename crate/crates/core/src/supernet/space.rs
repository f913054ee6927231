use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::arch::ArchParams;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Identity,
    Zero,
    /// `W x` with a trainable `d × d` matrix.
    Dense,
    /// `a ⊙ x` with a trainable vector.
    Diagonal,
    /// Elementwise `ln(1 + eˣ)`.
    Softplus,
}

impl OpKind {
    pub fn param_count(self, dim: usize) -> usize {
        match self {
            OpKind::Dense => dim * dim,
            OpKind::Diagonal => dim,
            OpKind::Identity | OpKind::Zero | OpKind::Softplus => 0,
        }
    }

    /// Identity, zero, two linear maps and a smooth nonlinearity.
    pub const DEFAULT: [OpKind; 5] = [OpKind::Identity, OpKind::Zero, OpKind::Dense, OpKind::Diagonal, OpKind::Softplus];
}

/// Edge `to ← from` with `from < to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub to: usize,
    pub from: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct SearchSpace {
    nodes: usize,
    edges: Vec<Edge>,
    ops: Vec<OpKind>,
    dim: usize,
    offsets: Vec<usize>,
}

/// Wire form: `{"nodes": 3, "edges": [[1, 0], [2, 0], [2, 1]], "ops": [...], "dim": 2}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpace {
    nodes: usize,
    edges: Vec<(usize, usize)>,
    ops: Vec<OpKind>,
    dim: usize,
}

impl TryFrom<RawSpace> for SearchSpace {
    type Error = crate::Error;

    fn try_from(raw: RawSpace) -> Result<Self> {
        let edges = raw.edges.into_iter().map(|(to, from)| Edge { to, from }).collect();
        SearchSpace::new(raw.nodes, edges, raw.ops, raw.dim)
    }
}

impl From<SearchSpace> for RawSpace {
    fn from(space: SearchSpace) -> Self {
        RawSpace {
            nodes: space.nodes,
            edges: space.edges.iter().map(|e| (e.to, e.from)).collect(),
            ops: space.ops,
            dim: space.dim,
        }
    }
}

impl SearchSpace {
    /// Edges are sorted by `(to, from)`, which is a topological order.
    pub fn new(nodes: usize, mut edges: Vec<Edge>, ops: Vec<OpKind>, dim: usize) -> Result<Self> {
        if nodes < 2 {
            return Err(invalid("a cell needs an input and an output node"));
        }
        if dim == 0 {
            return Err(invalid("feature dimension must be positive"));
        }
        if ops.is_empty() || edges.is_empty() {
            return Err(invalid("a cell needs at least one edge and one operation"));
        }
        for e in &edges {
            if e.from >= e.to || e.to >= nodes {
                return Err(invalid(format!(
                    "edge ({}, {}) must point from an earlier node to a later one inside {nodes} nodes",
                    e.to, e.from
                )));
            }
        }
        edges.sort_by_key(|e| (e.to, e.from));
        if edges.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("duplicate edge"));
        }
        let mut offsets = Vec::with_capacity(edges.len() * ops.len() + 1);
        let mut total = 0;
        for _ in &edges {
            for op in &ops {
                offsets.push(total);
                total += op.param_count(dim);
            }
        }
        offsets.push(total);
        Ok(Self { nodes, edges, ops, dim, offsets })
    }

    /// Every edge `(i, j)`, `j < i < nodes`.
    pub fn dense(nodes: usize, ops: Vec<OpKind>, dim: usize) -> Result<Self> {
        let edges = (1..nodes).flat_map(|to| (0..to).map(move |from| Edge { to, from })).collect();
        Self::new(nodes, edges, ops, dim)
    }

    /// Three nodes, edges `(1,0)`, `(2,0)`, `(2,1)`.
    pub fn three_edge(ops: Vec<OpKind>, dim: usize) -> Result<Self> {
        Self::dense(3, ops, dim)
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn ops(&self) -> &[OpKind] {
        &self.ops
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_ops(&self) -> usize {
        self.ops.len()
    }

    pub fn output_node(&self) -> usize {
        self.nodes - 1
    }

    /// Length of the shared weight vector.
    pub fn num_params(&self) -> usize {
        *self.offsets.last().expect("offsets end with the total")
    }

    /// Slice of the shared weights owned by operation `op` on edge `edge`.
    pub fn param_range(&self, edge: usize, op: usize) -> core::ops::Range<usize> {
        let k = edge * self.ops.len() + op;
        self.offsets[k]..self.offsets[k + 1]
    }

    /// `|O|^|E|`, saturating.
    pub fn num_architectures(&self) -> u128 {
        let mut n: u128 = 1;
        for _ in &self.edges {
            n = n.saturating_mul(self.ops.len() as u128);
        }
        n
    }

    /// The `index`-th architecture in mixed-radix order (edge 0 slowest).
    pub fn architecture(&self, mut index: u128) -> DiscreteArchitecture {
        let k = self.ops.len() as u128;
        let mut ops = vec![0; self.edges.len()];
        for slot in ops.iter_mut().rev() {
            *slot = (index % k) as usize;
            index /= k;
        }
        DiscreteArchitecture { ops }
    }
}

/// One operation index per edge.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DiscreteArchitecture {
    pub ops: Vec<usize>,
}

impl DiscreteArchitecture {
    pub fn new(ops: Vec<usize>) -> Self {
        Self { ops }
    }

    /// Row-major `|E| × |O|` indicator matrix.
    pub fn one_hot(&self, num_ops: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.ops.len() * num_ops];
        for (e, op) in self.ops.iter().enumerate() {
            out[e * num_ops + op] = 1.0;
        }
        out
    }
}

/// Per-edge argmax of the mixture weights; ties go to the lowest index.
pub fn discretize(theta: &ArchParams) -> DiscreteArchitecture {
    let weights = theta.weights();
    let ops = weights
        .chunks(theta.ops())
        .map(|row| {
            let mut best = 0;
            for (o, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = o;
                }
            }
            best
        })
        .collect();
    DiscreteArchitecture { ops }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::Chart;

    #[test]
    fn discretize_examples() {
        let one_hot = DiscreteArchitecture::new(vec![2, 0]);
        let mut values = one_hot.one_hot(3);
        // simplex chart needs strictly positive rows; logits reproduce the same argmax
        for v in &mut values {
            *v *= 10.0;
        }
        let theta = ArchParams::from_values(2, 3, Chart::Logits, values).unwrap();
        assert_eq!(discretize(&theta), one_hot);

        let theta = ArchParams::from_values(1, 3, Chart::Simplex, vec![0.2, 0.5, 0.3]).unwrap();
        assert_eq!(discretize(&theta).ops, vec![1]);
        let tie = ArchParams::from_values(1, 2, Chart::Simplex, vec![0.5, 0.5]).unwrap();
        assert_eq!(discretize(&tie).ops, vec![0]);
    }

    #[test]
    fn layout_and_enumeration() {
        let space = SearchSpace::three_edge(OpKind::DEFAULT.to_vec(), 2).unwrap();
        assert_eq!(space.num_edges(), 3);
        assert_eq!(space.num_params(), 3 * (4 + 2));
        assert_eq!(space.param_range(0, 2), 0..4);
        assert_eq!(space.param_range(0, 3), 4..6);
        assert_eq!(space.param_range(1, 2), 6..10);
        assert_eq!(space.num_architectures(), 125);
        assert_eq!(space.architecture(0).ops, vec![0, 0, 0]);
        assert_eq!(space.architecture(124).ops, vec![4, 4, 4]);
        assert_eq!(space.architecture(7).ops, vec![0, 1, 2]);
    }

    #[test]
    fn rejects_invalid_graphs() {
        let ops = vec![OpKind::Identity];
        assert!(SearchSpace::new(3, vec![Edge { to: 1, from: 1 }], ops.clone(), 2).is_err());
        assert!(SearchSpace::new(3, vec![Edge { to: 0, from: 1 }], ops.clone(), 2).is_err());
        assert!(SearchSpace::new(3, vec![Edge { to: 3, from: 1 }], ops.clone(), 2).is_err());
        assert!(SearchSpace::new(3, vec![Edge { to: 2, from: 1 }, Edge { to: 2, from: 1 }], ops, 2).is_err());
    }
}
