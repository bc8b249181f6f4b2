//! Dense kernels, the project random number generator and small numerical
//! helpers. Everything here is deterministic for fixed inputs and seed.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "{}x{} matrix needs {} values, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::shape("ragged rows"));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Inner product with four interleaved accumulators, combined in a fixed order.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = i * 4;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in chunks * 4..a.len() {
        tail += a[j] * b[j];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail
}

/// `M v`.
pub fn matvec(m: &Matrix, v: &[f64]) -> Result<Vec<f64>> {
    if m.cols != v.len() {
        return Err(Error::shape(format!(
            "matvec: {}x{} matrix times vector of length {}",
            m.rows,
            m.cols,
            v.len()
        )));
    }
    Ok(matvec_rows(&m.data, m.cols, v))
}

/// Product of a row-major block (rows of width `cols`) with `v`. Shapes are
/// the caller's responsibility.
#[inline]
pub fn matvec_rows(block: &[f64], cols: usize, v: &[f64]) -> Vec<f64> {
    block.chunks_exact(cols).map(|row| dot(row, v)).collect()
}

/// `out += Mᵀ v` for a row-major block with `v.len()` rows.
#[inline]
pub fn add_matvec_t(block: &[f64], cols: usize, v: &[f64], out: &mut [f64]) {
    for (row, &s) in block.chunks_exact(cols).zip(v) {
        if s != 0.0 {
            axpy(s, row, out);
        }
    }
}

/// `M += a bᵀ` for a row-major block of `a.len()` rows by `b.len()` cols.
#[inline]
pub fn add_outer(block: &mut [f64], a: &[f64], b: &[f64]) {
    for (row, &s) in block.chunks_exact_mut(b.len()).zip(a) {
        if s != 0.0 {
            axpy(s, b, row);
        }
    }
}

/// `y += a x`.
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically stable softmax (max subtraction).
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let mut out = z.to_vec();
    softmax_in_place(&mut out);
    out
}

pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    let inv = 1.0 / sum;
    for v in z.iter_mut() {
        *v *= inv;
    }
}

/// Project random number generator.
///
/// The bit stream is ChaCha8 keyed by `seed_from_u64(seed)`; uniform doubles
/// take the top 53 bits of each 64-bit word scaled by 2^-53, so they lie in
/// [0, 1). Gaussians use the Box-Muller transform on pairs of uniforms.
/// The generator is single-owner; derive independent streams with [`Rng::split`].
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 32-bit words consumed so far.
    pub fn position(&self) -> u128 {
        self.inner.get_word_pos()
    }

    /// Child generator with a seed derived from this one's seed and `index`.
    pub fn split(&self, index: u64) -> Rng {
        Rng::new(splitmix64(
            self.seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15),
        ))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `n` draws from N(mean, stddev²) via Box-Muller. Each pair of uniforms
/// yields two draws; an odd tail discards the second one.
pub fn sample_gaussian(rng: &mut Rng, mean: f64, stddev: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        // 1 - u lies in (0, 1], keeping ln finite
        let u1 = 1.0 - rng.uniform();
        let u2 = rng.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        out.push(mean + stddev * r * theta.cos());
        if out.len() < n {
            out.push(mean + stddev * r * theta.sin());
        }
    }
    out
}

/// `n` draws uniform in [lo, hi).
pub fn sample_uniform(rng: &mut Rng, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let width = hi - lo;
    (0..n)
        .map(|_| {
            let v = lo + width * rng.uniform();
            // rounding can land exactly on hi when width is tiny relative to lo
            if v >= hi && hi > lo {
                lo
            } else {
                v
            }
        })
        .collect()
}

/// Inverted dropout mask: 0 with probability `p_drop`, else `1/(1-p_drop)`.
pub fn dropout_mask(rng: &mut Rng, n: usize, p_drop: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&p_drop) {
        return Err(Error::InvalidDropout(p_drop));
    }
    if p_drop == 0.0 {
        return Ok(vec![1.0; n]);
    }
    let keep = 1.0 / (1.0 - p_drop);
    Ok((0..n)
        .map(|_| if rng.uniform() < p_drop { 0.0 } else { keep })
        .collect())
}

/// Global L2 norm over a collection of arrays.
pub fn global_norm<'a>(arrays: impl IntoIterator<Item = &'a [f64]>) -> f64 {
    arrays
        .into_iter()
        .map(|a| a.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// Rescale all arrays so their global norm is at most `max_norm`. Returns the
/// factor applied (1 when unchanged).
pub fn clip_by_global_norm(arrays: &mut [&mut [f64]], max_norm: f64) -> f64 {
    let norm = global_norm(arrays.iter().map(|a| &**a));
    if norm <= max_norm || norm == 0.0 {
        return 1.0;
    }
    let factor = max_norm / norm;
    for a in arrays.iter_mut() {
        for v in a.iter_mut() {
            *v *= factor;
        }
    }
    factor
}
