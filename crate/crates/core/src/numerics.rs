//! Dense vector helpers, seeded random streams and finite differences.

use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub fn check_len(a: &[f64], expected: usize) -> Result<()> {
    if a.len() != expected {
        return Err(Error::LengthMismatch { expected, got: a.len() });
    }
    Ok(())
}

pub fn check_finite(a: &[f64]) -> Result<()> {
    match a.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// Euclidean inner product.
pub fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len(b, a.len())?;
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

pub fn norm_l2(a: &[f64]) -> f64 {
    libm::sqrt(a.iter().map(|v| v * v).sum())
}

pub fn norm_l1(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Row-wise softmax of a row-major matrix with `cols` columns.
pub fn softmax_rows(values: &[f64], cols: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    for row in values.chunks(cols) {
        let max = row.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
        let start = out.len();
        let mut total = 0.0;
        for v in row {
            let e = libm::exp(v - max);
            total += e;
            out.push(e);
        }
        for v in &mut out[start..] {
            *v /= total;
        }
    }
    out
}

/// Central-difference gradient `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn finite_diff_grad<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(alloc::format!("step h must be positive, got {h}")));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let plus = f(&probe);
        probe[i] = x[i] - h;
        let minus = f(&probe);
        probe[i] = x[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite { index: i });
        }
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}

/// Relative error `|a - b| / max(|a|, |b|, floor)` used by gradient checks.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff = norm_l2(&sub(a, b));
    let scale = norm_l2(a).max(norm_l2(b)).max(floor);
    diff / scale
}

/// FNV-1a over the bit patterns of a blockwise point.
pub fn hash_blocks(blocks: &[Vec<f64>]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for block in blocks {
        for byte in (block.len() as u64).to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        for v in block {
            for byte in v.to_bits().to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
    }
    h
}

/// Purpose of a random stream. Together with a seed and an index it selects
/// an independent ChaCha stream, so the draws for one purpose never depend on
/// how many draws another purpose consumed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum StreamTag {
    Block = 1,
    Data = 2,
    Output = 3,
    Init = 4,
    Noise = 5,
    Arch = 6,
    Problem = 7,
    Replicate = 8,
    Shuffle = 9,
}

const INDEX_MASK: u64 = (1 << 56) - 1;

/// Counter-based random stream keyed by `(seed, tag, index)`.
#[derive(Debug, Clone)]
pub struct StreamRng(ChaCha8Rng);

impl StreamRng {
    pub fn new(seed: u64, tag: StreamTag, index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(((tag as u64) << 56) | (index & INDEX_MASK));
        Self(inner)
    }

    /// Derives a child seed, e.g. one seed per architecture in a sweep.
    pub fn derive_seed(seed: u64, tag: StreamTag, index: u64) -> u64 {
        Self::new(seed, tag, index).next_u64()
    }

    pub fn normal(&mut self) -> f64 {
        self.sample(StandardNormal)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.random::<f64>()
    }

    /// Uniform index in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.random_range(0..n)
    }

    /// Index drawn with probability proportional to `weights`.
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let mut u = self.uniform() * total;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                return i;
            }
            u -= w;
        }
        // rounding can leave u marginally above the last weight
        weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

impl RngCore for StreamRng {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}
