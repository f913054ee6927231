//! Forward propagation and hand-coded reverse-mode gradients.

use alloc::vec;
use alloc::vec::Vec;

use crate::arch::{ArchParams, Chart};
use crate::error::{invalid, Error, Result};
use crate::numerics::{check_finite, check_len, sigmoid, softplus, StreamRng, StreamTag};

use super::data::Dataset;
use super::space::{DiscreteArchitecture, OpKind, SearchSpace};

/// `out += scale · op(x)`
fn apply_op(op: OpKind, params: &[f64], x: &[f64], scale: f64, out: &mut [f64]) {
    let d = x.len();
    match op {
        OpKind::Identity => {
            for (o, xi) in out.iter_mut().zip(x) {
                *o += scale * xi;
            }
        }
        OpKind::Zero => {}
        OpKind::Dense => {
            for (r, o) in out.iter_mut().enumerate() {
                let row = &params[r * d..(r + 1) * d];
                let v: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
                *o += scale * v;
            }
        }
        OpKind::Diagonal => {
            for ((o, a), xi) in out.iter_mut().zip(params).zip(x) {
                *o += scale * (a * xi);
            }
        }
        OpKind::Softplus => {
            for (o, xi) in out.iter_mut().zip(x) {
                *o += scale * softplus(*xi);
            }
        }
    }
}

/// Back-propagates `g` through `scale · op(x)`.
///
/// Accumulates into `gx` and `gp` and returns `⟨g, op(x)⟩`, the derivative
/// with respect to `scale`.
fn backward_op(op: OpKind, params: &[f64], x: &[f64], g: &[f64], scale: f64, gx: &mut [f64], gp: &mut [f64]) -> f64 {
    let d = x.len();
    match op {
        OpKind::Identity => {
            for (gxi, gi) in gx.iter_mut().zip(g) {
                *gxi += scale * gi;
            }
            g.iter().zip(x).map(|(a, b)| a * b).sum()
        }
        OpKind::Zero => 0.0,
        OpKind::Dense => {
            let mut inner = 0.0;
            for r in 0..d {
                let row = &params[r * d..(r + 1) * d];
                let v: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
                inner += g[r] * v;
                let sg = scale * g[r];
                for c in 0..d {
                    gx[c] += sg * row[c];
                    gp[r * d + c] += sg * x[c];
                }
            }
            inner
        }
        OpKind::Diagonal => {
            let mut inner = 0.0;
            for i in 0..d {
                inner += g[i] * params[i] * x[i];
                gx[i] += scale * g[i] * params[i];
                gp[i] += scale * g[i] * x[i];
            }
            inner
        }
        OpKind::Softplus => {
            let mut inner = 0.0;
            for i in 0..d {
                inner += g[i] * softplus(x[i]);
                gx[i] += scale * g[i] * sigmoid(x[i]);
            }
            inner
        }
    }
}

fn check_inputs(space: &SearchSpace, w: &[f64], inputs: &[f64]) -> Result<usize> {
    check_len(w, space.num_params())?;
    check_finite(w)?;
    let d = space.dim();
    if inputs.is_empty() || !inputs.len().is_multiple_of(d) {
        return Err(invalid(alloc::format!(
            "input batch of length {} is not a nonempty multiple of dimension {d}",
            inputs.len()
        )));
    }
    check_finite(inputs)?;
    Ok(inputs.len() / d)
}

fn check_theta(space: &SearchSpace, theta: &ArchParams) -> Result<()> {
    if theta.edges() != space.num_edges() || theta.ops() != space.num_ops() {
        return Err(Error::LengthMismatch {
            expected: space.num_edges() * space.num_ops(),
            got: theta.edges() * theta.ops(),
        });
    }
    theta.validate()
}

/// Node features for one sample; `mix` holds `|E| × |O|` mixture weights.
fn propagate(space: &SearchSpace, w: &[f64], mix: &[f64], x: &[f64], nodes: &mut [f64]) -> Result<()> {
    let d = space.dim();
    let k = space.num_ops();
    nodes.fill(0.0);
    nodes[..d].copy_from_slice(x);
    let mut e = 0;
    let edges = space.edges();
    for node in 1..space.nodes() {
        let (before, rest) = nodes.split_at_mut(node * d);
        let out = &mut rest[..d];
        while e < edges.len() && edges[e].to == node {
            let src = &before[edges[e].from * d..(edges[e].from + 1) * d];
            for (o, op) in space.ops().iter().enumerate() {
                let scale = mix[e * k + o];
                if scale != 0.0 {
                    apply_op(*op, &w[space.param_range(e, o)], src, scale, out);
                }
            }
            e += 1;
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteNode { node });
        }
    }
    Ok(())
}

fn predict(space: &SearchSpace, w: &[f64], mix: &[f64], inputs: &[f64]) -> Result<Vec<f64>> {
    let d = space.dim();
    let out_node = space.output_node();
    let mut nodes = vec![0.0; space.nodes() * d];
    let mut preds = Vec::with_capacity(inputs.len());
    for x in inputs.chunks(d) {
        propagate(space, w, mix, x, &mut nodes)?;
        preds.extend_from_slice(&nodes[out_node * d..(out_node + 1) * d]);
    }
    Ok(preds)
}

/// Predictions of the θ-weighted mixture for a row-major batch of inputs.
pub fn forward_mixture(space: &SearchSpace, w: &[f64], theta: &ArchParams, inputs: &[f64]) -> Result<Vec<f64>> {
    check_theta(space, theta)?;
    check_inputs(space, w, inputs)?;
    predict(space, w, &theta.weights(), inputs)
}

/// Predictions of one discrete architecture using the shared weights.
pub fn forward_discrete(
    space: &SearchSpace,
    w: &[f64],
    arch: &DiscreteArchitecture,
    inputs: &[f64],
) -> Result<Vec<f64>> {
    if arch.ops.len() != space.num_edges() || arch.ops.iter().any(|o| *o >= space.num_ops()) {
        return Err(invalid("architecture does not fit the search space"));
    }
    check_inputs(space, w, inputs)?;
    predict(space, w, &arch.one_hot(space.num_ops()), inputs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGrads {
    pub loss: f64,
    pub grad_w: Vec<f64>,
    /// In the chart of the supplied θ: with respect to the weights for
    /// [`Chart::Simplex`], with respect to the logits for [`Chart::Logits`].
    pub grad_theta: Vec<f64>,
}

/// Mean squared error `(1/B) Σ ½‖ŷ − y‖²` over `batch` plus `λ‖w‖²`, with
/// both block gradients.
pub fn loss_and_grads(
    space: &SearchSpace,
    w: &[f64],
    theta: &ArchParams,
    data: &Dataset,
    batch: &[usize],
    weight_decay: f64,
) -> Result<LossGrads> {
    check_theta(space, theta)?;
    check_len(w, space.num_params())?;
    check_finite(w)?;
    if data.dim() != space.dim() {
        return Err(Error::LengthMismatch { expected: space.dim(), got: data.dim() });
    }
    if batch.is_empty() {
        return Err(invalid("empty batch"));
    }
    if let Some(i) = batch.iter().find(|i| **i >= data.len()) {
        return Err(invalid(alloc::format!("batch index {i} outside dataset of {}", data.len())));
    }
    let mix = theta.weights();
    let mut lg = mixture_loss_and_grads(space, w, &mix, data, batch, weight_decay)?;
    if theta.chart() == Chart::Logits {
        let k = space.num_ops();
        for (g, p) in lg.grad_theta.chunks_mut(k).zip(mix.chunks(k)) {
            let inner: f64 = g.iter().zip(p).map(|(a, b)| a * b).sum();
            for (gi, pi) in g.iter_mut().zip(p) {
                *gi = pi * (*gi - inner);
            }
        }
    }
    Ok(lg)
}

/// Gradient with respect to the raw mixture weights, no validation.
pub(crate) fn mixture_loss_and_grads(
    space: &SearchSpace,
    w: &[f64],
    mix: &[f64],
    data: &Dataset,
    batch: &[usize],
    weight_decay: f64,
) -> Result<LossGrads> {
    let d = space.dim();
    let k = space.num_ops();
    let n = space.nodes();
    let edges = space.edges();
    let scale = 1.0 / batch.len() as f64;
    let mut nodes = vec![0.0; n * d];
    let mut grads = vec![0.0; n * d];
    let mut grad_w = vec![0.0; w.len()];
    let mut grad_theta = vec![0.0; mix.len()];
    let mut loss = 0.0;
    for &i in batch {
        propagate(space, w, mix, data.input(i), &mut nodes)?;
        let out = &nodes[(n - 1) * d..];
        grads.fill(0.0);
        for ((g, p), y) in grads[(n - 1) * d..].iter_mut().zip(out).zip(data.target(i)) {
            let r = p - y;
            loss += 0.5 * r * r * scale;
            *g = r * scale;
        }
        for e in (0..edges.len()).rev() {
            let (to, from) = (edges[e].to, edges[e].from);
            let (g_low, g_high) = grads.split_at_mut(to * d);
            let g_out = &g_high[..d];
            let g_src = &mut g_low[from * d..(from + 1) * d];
            let src = &nodes[from * d..(from + 1) * d];
            for (o, op) in space.ops().iter().enumerate() {
                let range = space.param_range(e, o);
                grad_theta[e * k + o] +=
                    backward_op(*op, &w[range.clone()], src, g_out, mix[e * k + o], g_src, &mut grad_w[range]);
            }
        }
    }
    if weight_decay != 0.0 {
        let mut norm_sq = 0.0;
        for (g, wi) in grad_w.iter_mut().zip(w) {
            norm_sq += wi * wi;
            *g += 2.0 * weight_decay * wi;
        }
        loss += weight_decay * norm_sq;
    }
    if !loss.is_finite() {
        return Err(Error::NonFiniteNode { node: n - 1 });
    }
    Ok(LossGrads { loss, grad_w, grad_theta })
}

/// Draws the shared weights from `rng`: entries `N(0, scale²/fan_in)` with
/// fan-in `d` for dense maps and 1 for diagonal ones.
pub(crate) fn sample_weights(space: &SearchSpace, scale: f64, rng: &mut StreamRng) -> Vec<f64> {
    let d = space.dim();
    let mut w = vec![0.0; space.num_params()];
    for e in 0..space.num_edges() {
        for (o, op) in space.ops().iter().enumerate() {
            let std = match op {
                OpKind::Dense => scale / libm::sqrt(d as f64),
                _ => scale,
            };
            for v in &mut w[space.param_range(e, o)] {
                *v = std * rng.normal();
            }
        }
    }
    w
}

/// Initial shared weights for `seed`.
pub fn init_weights(space: &SearchSpace, scale: f64, seed: u64) -> Vec<f64> {
    sample_weights(space, scale, &mut StreamRng::new(seed, StreamTag::Init, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_grad, relative_error};
    use crate::supernet::space::Edge;

    fn random_data(d: usize, n: usize, seed: u64) -> Dataset {
        let mut rng = StreamRng::new(seed, StreamTag::Data, 0);
        let inputs = (0..n * d).map(|_| rng.normal()).collect();
        let targets = (0..n * d).map(|_| rng.normal()).collect();
        Dataset::new(d, inputs, targets).unwrap()
    }

    fn random_theta(space: &SearchSpace, chart: Chart, seed: u64) -> ArchParams {
        let mut rng = StreamRng::new(seed, StreamTag::Arch, 0);
        let n = space.num_edges() * space.num_ops();
        let values: Vec<f64> = match chart {
            Chart::Logits => (0..n).map(|_| rng.normal()).collect(),
            Chart::Simplex => {
                let raw: Vec<f64> = (0..n).map(|_| 0.1 + rng.uniform()).collect();
                raw.chunks(space.num_ops())
                    .flat_map(|r| {
                        let s: f64 = r.iter().sum();
                        r.iter().map(move |v| v / s).collect::<Vec<_>>()
                    })
                    .collect()
            }
        };
        ArchParams::from_values(space.num_edges(), space.num_ops(), chart, values).unwrap()
    }

    /// Evaluates one discrete architecture directly, op by op.
    fn reference_discrete(space: &SearchSpace, w: &[f64], arch: &DiscreteArchitecture, x: &[f64]) -> Vec<f64> {
        let d = space.dim();
        let mut nodes = vec![vec![0.0; d]; space.nodes()];
        nodes[0] = x.to_vec();
        for (e, edge) in space.edges().iter().enumerate() {
            let o = arch.ops[e];
            let p = &w[space.param_range(e, o)];
            let src = nodes[edge.from].clone();
            let v: Vec<f64> = match space.ops()[o] {
                OpKind::Identity => src,
                OpKind::Zero => vec![0.0; d],
                OpKind::Dense => (0..d).map(|r| (0..d).map(|c| p[r * d + c] * src[c]).sum()).collect(),
                OpKind::Diagonal => (0..d).map(|i| p[i] * src[i]).collect(),
                OpKind::Softplus => src.iter().map(|v| libm::log1p(libm::exp(*v))).collect(),
            };
            for i in 0..d {
                nodes[edge.to][i] += v[i];
            }
        }
        nodes.pop().unwrap()
    }

    #[test]
    fn one_hot_mixture_equals_discrete_forward() {
        let space = SearchSpace::dense(4, OpKind::DEFAULT.to_vec(), 3).unwrap();
        let w = init_weights(&space, 1.0, 5);
        let data = random_data(3, 7, 1);
        for index in [0u128, 17, 999, 15624] {
            let arch = space.architecture(index);
            let discrete = forward_discrete(&space, &w, &arch, data.inputs()).unwrap();
            let mixed = predict(&space, &w, &arch.one_hot(5), data.inputs()).unwrap();
            assert_eq!(discrete, mixed);
            let reference: Vec<f64> =
                data.inputs().chunks(3).flat_map(|x| reference_discrete(&space, &w, &arch, x)).collect();
            assert!(relative_error(&mixed, &reference, 1e-12) < 1e-12);
        }
    }

    #[test]
    fn identity_output_counts_paths() {
        // 0→1, 0→2, 1→2, 0→3, 1→3, 2→3: paths from 0 to 3 are 0-3, 0-1-3, 0-2-3, 0-1-2-3
        let space = SearchSpace::dense(4, vec![OpKind::Identity], 2).unwrap();
        let theta = ArchParams::uniform(6, 1, Chart::Simplex);
        let out = forward_mixture(&space, &[], &theta, &[1.5, -2.0]).unwrap();
        assert_eq!(out, vec![6.0, -8.0]);

        let space = SearchSpace::new(
            4,
            vec![Edge { to: 1, from: 0 }, Edge { to: 2, from: 1 }, Edge { to: 3, from: 2 }, Edge { to: 3, from: 0 }],
            vec![OpKind::Identity],
            1,
        )
        .unwrap();
        let theta = ArchParams::uniform(4, 1, Chart::Simplex);
        assert_eq!(forward_mixture(&space, &[], &theta, &[0.25]).unwrap(), vec![0.5]);
    }

    #[test]
    fn zero_ops_give_zero_output_and_loss() {
        let space = SearchSpace::three_edge(vec![OpKind::Zero, OpKind::Dense], 2).unwrap();
        let w = init_weights(&space, 1.0, 0);
        let arch = DiscreteArchitecture::new(vec![0, 0, 0]);
        let out = forward_discrete(&space, &w, &arch, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(out, vec![0.0; 4]);

        let data = Dataset::new(2, vec![1.0, 2.0, 3.0, 4.0], vec![0.0; 4]).unwrap();
        let theta = ArchParams::from_values(3, 2, Chart::Simplex, vec![0.5; 6]).unwrap();
        let mix = arch.one_hot(2);
        let lg = mixture_loss_and_grads(&space, &w, &mix, &data, &[0, 1], 0.0).unwrap();
        assert_eq!(lg.loss, 0.0);
        assert!(loss_and_grads(&space, &w, &theta, &data, &[0, 1], 0.0).unwrap().loss > 0.0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let space = SearchSpace::three_edge(OpKind::DEFAULT.to_vec(), 2).unwrap();
        let data = random_data(2, 5, 3);
        let batch: Vec<usize> = (0..5).collect();
        for seed in 0..5 {
            for chart in [Chart::Simplex, Chart::Logits] {
                let w = init_weights(&space, 1.0, seed);
                let theta = random_theta(&space, chart, seed);
                let lg = loss_and_grads(&space, &w, &theta, &data, &batch, 0.01).unwrap();

                let fd_w = finite_diff_grad(
                    |v| loss_and_grads(&space, v, &theta, &data, &batch, 0.01).unwrap().loss,
                    &w,
                    1e-5,
                )
                .unwrap();
                assert!(relative_error(&lg.grad_w, &fd_w, 1e-8) <= 1e-4);

                // in the simplex chart differentiate the mixture with weights off the simplex
                let fd_t = finite_diff_grad(
                    |v| match chart {
                        Chart::Simplex => mixture_loss_and_grads(&space, &w, v, &data, &batch, 0.01).unwrap().loss,
                        Chart::Logits => {
                            let t = ArchParams::from_values(3, 5, Chart::Logits, v.to_vec()).unwrap();
                            loss_and_grads(&space, &w, &t, &data, &batch, 0.01).unwrap().loss
                        }
                    },
                    theta.values(),
                    1e-5,
                )
                .unwrap();
                assert!(relative_error(&lg.grad_theta, &fd_t, 1e-8) <= 1e-4, "{chart:?}");
            }
        }
    }

    #[test]
    fn softmax_chart_matches_direct_weights() {
        let space = SearchSpace::dense(4, OpKind::DEFAULT.to_vec(), 3).unwrap();
        let w = init_weights(&space, 1.0, 2);
        let data = random_data(3, 4, 9);
        let logits = random_theta(&space, Chart::Logits, 4);
        let direct = ArchParams::from_values(6, 5, Chart::Simplex, logits.weights()).unwrap();
        let a = forward_mixture(&space, &w, &logits, data.inputs()).unwrap();
        let b = forward_mixture(&space, &w, &direct, data.inputs()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn mixture_is_linear_in_one_edge() {
        let space = SearchSpace::three_edge(OpKind::DEFAULT.to_vec(), 2).unwrap();
        let w = init_weights(&space, 1.0, 8);
        let base = random_theta(&space, Chart::Simplex, 1).into_values();
        let other = random_theta(&space, Chart::Simplex, 2).into_values();
        let x = [0.7, -1.1];
        // edge 0 feeds node 1; node 1 features are affine in that edge's row
        let node1 = |row: &[f64]| {
            let mut mix = base.clone();
            mix[..5].copy_from_slice(row);
            let mut nodes = vec![0.0; 6];
            propagate(&space, &w, &mix, &x, &mut nodes).unwrap();
            [nodes[2], nodes[3]]
        };
        let alpha = 0.3;
        let blend: Vec<f64> = base[..5].iter().zip(&other[..5]).map(|(a, b)| alpha * b + (1.0 - alpha) * a).collect();
        let f0 = node1(&base[..5]);
        let f1 = node1(&other[..5]);
        let fb = node1(&blend);
        for i in 0..2 {
            assert!((fb[i] - (alpha * f1[i] + (1.0 - alpha) * f0[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_fit_has_zero_weight_gradient() {
        let space = SearchSpace::three_edge(vec![OpKind::Dense, OpKind::Softplus], 2).unwrap();
        let w = init_weights(&space, 1.0, 4);
        let arch = DiscreteArchitecture::new(vec![0, 1, 0]);
        let inputs = vec![0.5, -0.2, 1.0, 0.3, -0.7, 0.9];
        let targets = forward_discrete(&space, &w, &arch, &inputs).unwrap();
        let data = Dataset::new(2, inputs, targets).unwrap();
        let mix = arch.one_hot(2);
        let lg = mixture_loss_and_grads(&space, &w, &mix, &data, &[0, 1, 2], 0.0).unwrap();
        assert_eq!(lg.loss, 0.0);
        assert!(lg.grad_w.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn reports_non_finite_nodes() {
        let space = SearchSpace::three_edge(vec![OpKind::Dense], 1).unwrap();
        let w = vec![1e200, 1e200, 1e200];
        let theta = ArchParams::uniform(3, 1, Chart::Simplex);
        assert_eq!(forward_mixture(&space, &w, &theta, &[1e200]), Err(Error::NonFiniteNode { node: 1 }));
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let space = SearchSpace::three_edge(vec![OpKind::Identity], 2).unwrap();
        let theta = ArchParams::uniform(3, 1, Chart::Simplex);
        assert!(forward_mixture(&space, &[], &theta, &[1.0]).is_err());
        assert!(forward_mixture(&space, &[], &theta, &[]).is_err());
        assert!(forward_mixture(&space, &[], &ArchParams::uniform(2, 1, Chart::Simplex), &[1.0, 2.0]).is_err());
    }
}
