use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{check_finite, StreamRng, StreamTag};

use super::forward::{forward_discrete, sample_weights};
use super::space::{DiscreteArchitecture, SearchSpace};

/// Regression pairs with `dim`-dimensional inputs and targets, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    dim: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize, inputs: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        if dim == 0 || inputs.is_empty() || !inputs.len().is_multiple_of(dim) {
            return Err(invalid("inputs must be a nonempty multiple of the dimension"));
        }
        if targets.len() != inputs.len() {
            return Err(Error::LengthMismatch { expected: inputs.len(), got: targets.len() });
        }
        check_finite(&inputs)?;
        check_finite(&targets)?;
        Ok(Self { dim, inputs, targets })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.dim..(i + 1) * self.dim]
    }

    /// `0..len`
    pub fn indices(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }
}

/// A dataset generated by one planted architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedTask {
    pub data: Dataset,
    pub arch: DiscreteArchitecture,
    pub weights: Vec<f64>,
}

/// Inputs `N(0, I)`, targets from `arch` under random weights of size
/// `weight_scale`, plus `N(0, noise²)` per coordinate.
pub fn planted_task(
    space: &SearchSpace,
    arch: &DiscreteArchitecture,
    samples: usize,
    noise: f64,
    weight_scale: f64,
    seed: u64,
) -> Result<PlantedTask> {
    if samples == 0 {
        return Err(invalid("a planted task needs at least one sample"));
    }
    if !(noise >= 0.0) {
        return Err(invalid("noise level must be nonnegative"));
    }
    let weights = sample_weights(space, weight_scale, &mut StreamRng::new(seed, StreamTag::Problem, 0));
    let mut rng = StreamRng::new(seed, StreamTag::Data, 0);
    let inputs: Vec<f64> = (0..samples * space.dim()).map(|_| rng.normal()).collect();
    let mut targets = forward_discrete(space, &weights, arch, &inputs)?;
    let mut rng = StreamRng::new(seed, StreamTag::Noise, 0);
    for t in &mut targets {
        *t += noise * rng.normal();
    }
    let data = Dataset::new(space.dim(), inputs, targets)?;
    Ok(PlantedTask { data, arch: arch.clone(), weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::supernet::OpKind;

    #[test]
    fn accessors_and_validation() {
        let data = Dataset::new(2, alloc::vec![1.0, 2.0, 3.0, 4.0], alloc::vec![0.0, 0.5, 1.0, 1.5]).unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(data.input(1), &[3.0, 4.0]);
        assert_eq!(data.target(0), &[0.0, 0.5]);
        assert!(Dataset::new(2, alloc::vec![1.0], alloc::vec![1.0]).is_err());
        assert!(Dataset::new(1, alloc::vec![1.0], alloc::vec![1.0, 2.0]).is_err());
        assert!(Dataset::new(1, alloc::vec![f64::NAN], alloc::vec![1.0]).is_err());
    }

    #[test]
    fn noiseless_planted_task_is_fit_exactly() {
        let space = SearchSpace::three_edge(OpKind::DEFAULT.to_vec(), 2).unwrap();
        let arch = DiscreteArchitecture::new(alloc::vec![2, 4, 3]);
        let task = planted_task(&space, &arch, 16, 0.0, 1.0, 3).unwrap();
        let again = planted_task(&space, &arch, 16, 0.0, 1.0, 3).unwrap();
        assert_eq!(task, again);
        let pred = forward_discrete(&space, &task.weights, &arch, task.data.inputs()).unwrap();
        assert_eq!(pred, task.data.targets());
    }
}
