use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::geometry::{BlockGeometry, ProductGeometry};
use crate::numerics::StreamRng;
use crate::problems::Objective;

use super::data::Dataset;
use super::forward::mixture_loss_and_grads;
use super::space::SearchSpace;

/// The single-level supernet loss as a two-block objective: shared weights
/// (Euclidean) and architecture weights (entropic product of simplices).
///
/// Stochastic gradients average over a minibatch drawn with replacement.
/// Failures inside the network surface as NaN values and gradients.
#[derive(Debug, Clone)]
pub struct SupernetObjective {
    space: SearchSpace,
    data: Dataset,
    weight_decay: f64,
    batch_size: usize,
    gamma: f64,
    geometry: ProductGeometry,
}

impl SupernetObjective {
    /// `gamma` is nominal: nothing certifies weak convexity of the network.
    pub fn new(space: SearchSpace, data: Dataset, weight_decay: f64, batch_size: usize, gamma: f64) -> Result<Self> {
        if space.num_params() == 0 {
            return Err(invalid("the weight block is empty"));
        }
        if data.dim() != space.dim() {
            return Err(invalid("dataset dimension differs from the search space"));
        }
        if batch_size == 0 {
            return Err(invalid("batch size must be positive"));
        }
        let geometry = ProductGeometry::new(vec![
            BlockGeometry::euclidean(space.num_params()),
            BlockGeometry::entropic_simplex_product(space.num_edges(), space.num_ops()),
        ])?;
        Ok(Self { space, data, weight_decay, batch_size, gamma, geometry })
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    fn block_grad(&self, x: &[Vec<f64>], block: usize, batch: &[usize]) -> Vec<f64> {
        match mixture_loss_and_grads(&self.space, &x[0], &x[1], &self.data, batch, self.weight_decay) {
            Ok(lg) if block == 0 => lg.grad_w,
            Ok(lg) => lg.grad_theta,
            Err(_) => vec![f64::NAN; x[block].len()],
        }
    }
}

impl Objective for SupernetObjective {
    fn geometry(&self) -> &ProductGeometry {
        &self.geometry
    }

    fn value(&self, x: &[Vec<f64>]) -> f64 {
        mixture_loss_and_grads(&self.space, &x[0], &x[1], &self.data, &self.data.indices(), self.weight_decay)
            .map_or(f64::NAN, |lg| lg.loss)
    }

    fn gradient(&self, x: &[Vec<f64>], block: usize) -> Vec<f64> {
        self.block_grad(x, block, &self.data.indices())
    }

    fn stochastic_gradient(&self, x: &[Vec<f64>], block: usize, rng: &mut StreamRng) -> Vec<f64> {
        let batch: Vec<usize> = (0..self.batch_size).map(|_| rng.below(self.data.len())).collect();
        self.block_grad(x, block, &batch)
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn lower_bound(&self) -> f64 {
        0.0
    }
}
