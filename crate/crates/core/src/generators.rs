//! Test-matrix families: Gaussian, polynomial feature maps (concatenated
//! Vandermonde blocks), low-rank plus row-sparse, and norm-bounded
//! perturbations.
//!
//! All randomness comes from ChaCha8 seeded with the caller's 64-bit seed;
//! normal variates use the ziggurat transform from `rand_distr`. The same
//! seed always reproduces the same matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{self, Matrix};

/// Declarative description of a generated instance, serializable into run
/// configs. The seed fully determines the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Gaussian {
        n: usize,
        d: usize,
        seed: u64,
    },
    /// Gaussian base matrix of width `k`, expanded by the degree-`q`
    /// polynomial feature map to width `k(q+1)`.
    VandermondeFeatures {
        n: usize,
        k: usize,
        q: usize,
        seed: u64,
    },
    LowRankSparse {
        n: usize,
        d: usize,
        k: usize,
        s: usize,
        seed: u64,
    },
    /// Gaussian base with a spectral-norm-bounded perturbation added; the
    /// bound depends on the exponent `p` the instance will be used with.
    Perturbed {
        n: usize,
        d: usize,
        p: f64,
        seed: u64,
    },
}

impl GeneratorSpec {
    pub fn build(&self) -> Result<Matrix> {
        match *self {
            GeneratorSpec::Gaussian { n, d, seed } => gaussian_matrix(n, d, seed),
            GeneratorSpec::VandermondeFeatures { n, k, q, seed } => {
                let base = gaussian_matrix(n, k, seed)?;
                vandermonde_features(&base, q)
            }
            GeneratorSpec::LowRankSparse { n, d, k, s, seed } => {
                low_rank_plus_sparse(n, d, k, s, seed)
            }
            GeneratorSpec::Perturbed { n, d, p, seed } => {
                let base = gaussian_matrix(n, d, seed)?;
                perturb_within_bound(&base, p, seed.wrapping_add(1))
            }
        }
    }

    pub fn rows(&self) -> usize {
        match *self {
            GeneratorSpec::Gaussian { n, .. }
            | GeneratorSpec::VandermondeFeatures { n, .. }
            | GeneratorSpec::LowRankSparse { n, .. }
            | GeneratorSpec::Perturbed { n, .. } => n,
        }
    }
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// n x d matrix of i.i.d. standard normal entries.
pub fn gaussian_matrix(n: usize, d: usize, seed: u64) -> Result<Matrix> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidInput("dimensions must be positive".into()));
    }
    let mut rng = rng_for(seed);
    let data: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    Matrix::new(n, d, data)
}

/// Degree-q polynomial feature map: block b, column j holds `A[i,b]^j` for
/// j = 0..q, giving an n x k(q+1) matrix.
pub fn vandermonde_features(a: &Matrix, q: usize) -> Result<Matrix> {
    if q < 1 {
        return Err(Error::InvalidInput("degree q must be >= 1".into()));
    }
    let (n, k) = (a.rows(), a.cols());
    let width = k * (q + 1);
    let mut out = Matrix::zeros(n, width);
    for i in 0..n {
        for b in 0..k {
            let x = a.get(i, b);
            let mut pow = 1.0f64;
            for j in 0..=q {
                if !pow.is_finite() {
                    return Err(Error::Overflow { row: i, col: b });
                }
                out.set(i, b * (q + 1) + j, pow);
                pow *= x;
            }
        }
    }
    Ok(out)
}

/// `K + S` with `K = G1 G2` of rank at most `k` and `S` holding exactly `s`
/// Gaussian entries per row on uniformly chosen distinct columns. Returns the
/// sum and the low-rank part separately so the construction can be audited.
pub fn low_rank_plus_sparse_parts(
    n: usize,
    d: usize,
    k: usize,
    s: usize,
    seed: u64,
) -> Result<(Matrix, Matrix)> {
    if k > d || s > d {
        return Err(Error::InvalidInput(format!(
            "need k <= d and s <= d, got k={k}, s={s}, d={d}"
        )));
    }
    if n == 0 || d == 0 {
        return Err(Error::InvalidInput("dimensions must be positive".into()));
    }
    let mut rng = rng_for(seed);
    let low_rank = if k == 0 {
        Matrix::zeros(n, d)
    } else {
        let g1_data: Vec<f64> = (0..n * k).map(|_| rng.sample(StandardNormal)).collect();
        let g2_data: Vec<f64> = (0..k * d).map(|_| rng.sample(StandardNormal)).collect();
        let g1 = Matrix::new(n, k, g1_data)?;
        let g2 = Matrix::new(k, d, g2_data)?;
        g1.matmul(&g2)?
    };

    let mut sum = low_rank.clone();
    if s > 0 {
        let mut cols: Vec<usize> = (0..d).collect();
        for i in 0..n {
            // partial Fisher-Yates: first s entries are a uniform sample
            // without replacement
            for j in 0..s {
                let pick = rng.random_range(j..d);
                cols.swap(j, pick);
            }
            for &c in &cols[..s] {
                let v: f64 = rng.sample(StandardNormal);
                sum.set(i, c, sum.get(i, c) + v);
            }
        }
    }
    Ok((sum, low_rank))
}

pub fn low_rank_plus_sparse(n: usize, d: usize, k: usize, s: usize, seed: u64) -> Result<Matrix> {
    low_rank_plus_sparse_parts(n, d, k, s, seed).map(|(sum, _)| sum)
}

/// Returns `A + E` where `E` is Gaussian rescaled so its spectral norm is
/// `0.99 * sigma_min(A) / (2 n^{1+1/p})`, the edge of the perturbation bound.
/// The spectral norm of the rescaled matrix is estimated by power iteration.
pub fn perturb_within_bound(a: &Matrix, p: f64, seed: u64) -> Result<Matrix> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidInput("p must satisfy 1 <= p < inf".into()));
    }
    let (sigma_min, sigma_max) = matrix::singular_extremes(a)?;
    if sigma_min <= matrix::DEFAULT_RANK_TOL * sigma_max || sigma_min == 0.0 {
        return Err(Error::RankDeficient { sigma_min });
    }
    let n = a.rows() as f64;
    let bound = sigma_min / (2.0 * n.powf(1.0 + 1.0 / p));
    let g = gaussian_matrix(a.rows(), a.cols(), seed)?;
    let g_norm = matrix::spectral_norm_power(&g);
    if g_norm == 0.0 {
        return Err(Error::InvalidInput("degenerate perturbation draw".into()));
    }
    let e = g.scale(0.99 * bound / g_norm);
    a.add(&e)
}
