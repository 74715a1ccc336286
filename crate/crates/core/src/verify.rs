//! Sampling-error estimation and the empirical checks for every testable
//! inequality in the toolkit.
//!
//! The sampling error of a draw is
//! `Lambda = sup_{||Ax||_p = 1} | ||SAx||_p^p - 1 |`. For p = 2 it is an
//! eigenvalue problem and is computed exactly; for general p the supremum is
//! lower-bounded by random probes plus projected gradient ascent on the unit
//! sphere in the column-space parameterization. Reported values are
//! certificates: the stored witness direction reproduces them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators;
use crate::matrix::{self, dot, lp_norm, Matrix};
use crate::sampling::SampleDraw;
use crate::scores;

/// Score tolerance used inside the bound checks; the bounds carry O(1)
/// slack, so tighter scores buy nothing.
const CHECK_SENS_TOL: f64 = 1e-6;
/// Gradient-norm stopping tolerance for the ascent.
const GRAD_TOL: f64 = 1e-8;
/// Ascent iteration cap per restart.
const MAX_ASCENT_ITER: usize = 200;
/// Momentum coefficient for the ascent direction.
const MOMENTUM: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistortionMethod {
    ExactL2,
    Probe,
    Optimize,
}

/// Certified lower bound on the sampling error plus the witness direction
/// that attains it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistortionReport {
    pub lambda_lower: f64,
    pub lambda_est: f64,
    pub method: DistortionMethod,
    pub witness: Vec<f64>,
    pub probes: usize,
    pub restarts: usize,
}

/// A pair (U, B) with U an orthonormal basis of col(A) and B the comparison
/// matrix expressed over the same coordinates, plus the map W with A W = U
/// used to translate witnesses back to x-space.
pub struct EmbeddingPair {
    pub u: Matrix,
    pub b: Matrix,
    pub w: Matrix,
}

impl EmbeddingPair {
    /// Pair for a sample draw of A: B = S U row-for-row, exactly.
    pub fn from_draw(a: &Matrix, dr: &SampleDraw) -> Result<Self> {
        if dr.source_rows != a.rows() {
            return Err(Error::ShapeMismatch {
                expected: format!("draw over {} rows", a.rows()),
                got: format!("{}", dr.source_rows),
            });
        }
        let (basis, w) = matrix::column_space_map(a, matrix::DEFAULT_RANK_TOL)?;
        let r = basis.rank;
        let mut b = Matrix::zeros(dr.kept.len(), r);
        for (out, &(idx, weight)) in dr.kept.iter().enumerate() {
            for j in 0..r {
                b.set(out, j, weight * basis.u.get(idx, j));
            }
        }
        Ok(Self { u: basis.u, b, w })
    }

    /// Pair for two matrices over the same column space (B need not be a
    /// row-subset of A).
    pub fn from_matrices(a: &Matrix, b: &Matrix) -> Result<Self> {
        if b.cols() != a.cols() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} columns", a.cols()),
                got: format!("{}", b.cols()),
            });
        }
        let (basis, w) = matrix::column_space_map(a, matrix::DEFAULT_RANK_TOL)?;
        let bt = if b.is_empty() {
            Matrix::empty(basis.rank)
        } else {
            b.matmul(&w)?
        };
        Ok(Self {
            u: basis.u,
            b: bt,
            w,
        })
    }

    fn dim(&self) -> usize {
        self.u.cols()
    }

    /// Distortion ratio `||B z||_p^p / ||U z||_p^p` at direction z.
    pub fn ratio(&self, z: &[f64], p: f64) -> f64 {
        let yu = self.u.matvec(z).expect("dim checked");
        let nu = lp_norm(&yu, p);
        if nu == 0.0 {
            return 0.0;
        }
        if self.b.is_empty() {
            return 0.0;
        }
        let yb = self.b.matvec(z).expect("dim checked");
        (lp_norm(&yb, p) / nu).powf(p)
    }

    fn ratio_and_grad(&self, z: &[f64], p: f64) -> (f64, Vec<f64>) {
        let r = self.dim();
        let yu = self.u.matvec(z).expect("dim checked");
        let sum_u: f64 = yu.iter().map(|v| v.abs().powf(p)).sum();
        if sum_u == 0.0 {
            return (0.0, vec![0.0; r]);
        }
        let (sum_b, gb) = if self.b.is_empty() {
            (0.0, vec![0.0; r])
        } else {
            let yb = self.b.matvec(z).expect("dim checked");
            let sum_b: f64 = yb.iter().map(|v| v.abs().powf(p)).sum();
            let mut gb = vec![0.0; r];
            for (i, v) in yb.iter().enumerate() {
                // subgradient p sign(v) |v|^{p-1}, zero at v = 0
                let h = if *v == 0.0 {
                    0.0
                } else {
                    p * v.signum() * v.abs().powf(p - 1.0)
                };
                if h == 0.0 {
                    continue;
                }
                let row = self.b.row(i);
                for j in 0..r {
                    gb[j] += h * row[j];
                }
            }
            (sum_b, gb)
        };
        let phi = sum_b / sum_u;
        let mut gu = vec![0.0; r];
        for (i, v) in yu.iter().enumerate() {
            let h = if *v == 0.0 {
                0.0
            } else {
                p * v.signum() * v.abs().powf(p - 1.0)
            };
            if h == 0.0 {
                continue;
            }
            let row = self.u.row(i);
            for j in 0..r {
                gu[j] += h * row[j];
            }
        }
        let grad: Vec<f64> = gb
            .iter()
            .zip(&gu)
            .map(|(b, u)| (b - phi * u) / sum_u)
            .collect();
        (phi, grad)
    }

    /// Witness in x-space with `||A x||_p = 1` for direction z.
    pub fn witness(&self, z: &[f64], p: f64) -> Vec<f64> {
        let yu = self.u.matvec(z).expect("dim checked");
        let nu = lp_norm(&yu, p);
        let scale = if nu > 0.0 { 1.0 / nu } else { 1.0 };
        let zi: Vec<f64> = z.iter().map(|v| v * scale).collect();
        // W is d x r: witness x = W (z / ||Uz||_p) realizes A x = U z / ||Uz||_p
        (0..self.w.rows()).map(|i| dot(self.w.row(i), &zi)).collect()
    }
}

fn normalize(z: &mut [f64]) -> f64 {
    let n = lp_norm(z, 2.0);
    if n > 0.0 {
        for v in z.iter_mut() {
            *v /= n;
        }
    }
    n
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let mut z: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        if normalize(&mut z) > 0.0 {
            return z;
        }
    }
}

/// Exact line search step candidates for the p = 2 ratio along `z + t dir`:
/// stationary points of a quadratic-over-quadratic.
fn quadratic_ratio_steps(pair: &EmbeddingPair, z: &[f64], dir: &[f64]) -> Vec<f64> {
    let bz = if pair.b.is_empty() {
        vec![]
    } else {
        pair.b.matvec(z).unwrap()
    };
    let bd = if pair.b.is_empty() {
        vec![]
    } else {
        pair.b.matvec(dir).unwrap()
    };
    let uz = pair.u.matvec(z).unwrap();
    let ud = pair.u.matvec(dir).unwrap();
    let a = dot(&bd, &bd);
    let b = dot(&bz, &bd);
    let c = dot(&bz, &bz);
    let d = dot(&ud, &ud);
    let e = dot(&uz, &ud);
    let f = dot(&uz, &uz);
    // stationary points of (a t^2 + 2 b t + c) / (d t^2 + 2 e t + f)
    let qa = a * e - b * d;
    let qb = a * f - c * d;
    let qc = b * f - c * e;
    let mut out = Vec::new();
    if qa.abs() > 1e-300 {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let s = disc.sqrt();
            out.push((-qb + s) / (2.0 * qa));
            out.push((-qb - s) / (2.0 * qa));
        }
    } else if qb.abs() > 1e-300 {
        out.push(-qc / qb);
    }
    out.retain(|t| t.is_finite() && *t > 0.0);
    out
}

struct AscentOutcome {
    lambda: f64,
    z: Vec<f64>,
}

/// Projected gradient ascent maximizing `sign * (ratio - 1)` over the unit
/// sphere, with momentum and backtracking line search.
fn ascend(pair: &EmbeddingPair, p: f64, sign: f64, start: &[f64]) -> AscentOutcome {
    let mut z = start.to_vec();
    normalize(&mut z);
    let (mut phi, mut grad) = pair.ratio_and_grad(&z, p);
    let mut best = AscentOutcome {
        lambda: (phi - 1.0).abs(),
        z: z.clone(),
    };
    let mut prev_step: Option<Vec<f64>> = None;
    let mut eta_seed = 1.0;

    for _iter in 0..MAX_ASCENT_ITER {
        // Riemannian gradient of the signed objective
        let mut g: Vec<f64> = grad.iter().map(|v| sign * v).collect();
        let gz = dot(&g, &z);
        for (gi, zi) in g.iter_mut().zip(&z) {
            *gi -= gz * zi;
        }
        let gnorm = lp_norm(&g, 2.0);
        if gnorm <= GRAD_TOL {
            break;
        }

        // momentum direction, reset when it stops being an ascent direction
        let mut dir = g.clone();
        if let Some(prev) = &prev_step {
            for (di, pi) in dir.iter_mut().zip(prev) {
                *di += MOMENTUM * pi;
            }
            let dz = dot(&dir, &z);
            for (di, zi) in dir.iter_mut().zip(&z) {
                *di -= dz * zi;
            }
            if dot(&dir, &g) <= 0.0 {
                dir = g.clone();
            }
        }
        let slope = dot(&dir, &g);

        // candidate steps: exact stationary steps for p = 2, then a
        // doubling/backtracking ladder
        let mut candidates: Vec<f64> = Vec::new();
        if p == 2.0 {
            candidates.extend(quadratic_ratio_steps(pair, &z, &dir));
        }
        let mut eta = eta_seed * 2.0;
        for _ in 0..60 {
            candidates.push(eta);
            eta *= 0.5;
            if eta < 1e-18 {
                break;
            }
        }

        let psi = sign * (phi - 1.0);
        let mut accepted = false;
        for &t in &candidates {
            let mut z_try: Vec<f64> = z.iter().zip(&dir).map(|(zi, di)| zi + t * di).collect();
            if normalize(&mut z_try) == 0.0 {
                continue;
            }
            let phi_try = pair.ratio(&z_try, p);
            if sign * (phi_try - 1.0) >= psi + 1e-4 * t * slope {
                prev_step = Some(
                    z_try
                        .iter()
                        .zip(&z)
                        .map(|(a, b)| a - b)
                        .collect::<Vec<f64>>(),
                );
                z = z_try;
                eta_seed = t.max(1e-12);
                let refreshed = pair.ratio_and_grad(&z, p);
                phi = refreshed.0;
                grad = refreshed.1;
                accepted = true;
                break;
            }
        }
        if !accepted {
            break;
        }
        if (phi - 1.0).abs() > best.lambda {
            best.lambda = (phi - 1.0).abs();
            best.z = z.clone();
        }
    }
    if (phi - 1.0).abs() > best.lambda {
        best.lambda = (phi - 1.0).abs();
        best.z = z;
    }
    best
}

/// Lower-bounds the sampling error of a pair by `probes` random directions
/// plus `restarts` ascent runs on each sign of the objective.
pub fn distortion_estimate_pair(
    pair: &EmbeddingPair,
    p: f64,
    probes: usize,
    restarts: usize,
    seed: u64,
) -> DistortionReport {
    let dim = pair.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_lambda = -1.0f64;
    let mut best_z = vec![0.0; dim];
    if dim == 0 {
        return DistortionReport {
            lambda_lower: 1.0,
            lambda_est: 1.0,
            method: DistortionMethod::Probe,
            witness: vec![],
            probes,
            restarts,
        };
    }

    for _ in 0..probes {
        let z = random_unit(&mut rng, dim);
        let lam = (pair.ratio(&z, p) - 1.0).abs();
        if lam > best_lambda {
            best_lambda = lam;
            best_z = z;
        }
    }

    let probe_best = best_z.clone();
    for restart in 0..restarts {
        for sign in [1.0, -1.0] {
            let start = if restart == 0 && probes > 0 {
                probe_best.clone()
            } else {
                random_unit(&mut rng, dim)
            };
            let out = ascend(pair, p, sign, &start);
            if out.lambda > best_lambda {
                best_lambda = out.lambda;
                best_z = out.z;
            }
        }
    }

    if best_lambda < 0.0 {
        // no probes and no restarts: fall back to a single deterministic
        // direction so the report is still a certificate
        let mut z = vec![1.0; dim];
        normalize(&mut z);
        best_lambda = (pair.ratio(&z, p) - 1.0).abs();
        best_z = z;
    }

    let witness = pair.witness(&best_z, p);
    DistortionReport {
        lambda_lower: best_lambda,
        lambda_est: best_lambda,
        method: if restarts > 0 {
            DistortionMethod::Optimize
        } else {
            DistortionMethod::Probe
        },
        witness,
        probes,
        restarts,
    }
}

/// Exact p = 2 sampling error via the eigenvalue extremes of `BᵀB` in the
/// orthonormal parameterization.
pub fn distortion_exact_l2_pair(pair: &EmbeddingPair) -> Result<DistortionReport> {
    let r = pair.dim();
    let m = pair.b.gram();
    let (vals, vecs) = matrix::sym_eigen(&m)?;
    let lmin = vals.first().copied().unwrap_or(0.0);
    let lmax = vals.last().copied().unwrap_or(0.0);
    let (lambda, idx) = if lmax - 1.0 > 1.0 - lmin {
        (lmax - 1.0, r - 1)
    } else {
        (1.0 - lmin, 0)
    };
    let z: Vec<f64> = (0..r).map(|i| vecs.get(i, idx)).collect();
    let lambda_lower = (pair.ratio(&z, 2.0) - 1.0).abs();
    let witness = pair.witness(&z, 2.0);
    Ok(DistortionReport {
        lambda_lower,
        lambda_est: lambda.max(lambda_lower),
        method: DistortionMethod::ExactL2,
        witness,
        probes: 0,
        restarts: 0,
    })
}

/// Exact p = 2 sampling error of a draw.
pub fn distortion_exact_l2(a: &Matrix, dr: &SampleDraw) -> Result<DistortionReport> {
    if (dr.p - 2.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!(
            "exact route requires a p = 2 draw, got p = {}",
            dr.p
        )));
    }
    let pair = EmbeddingPair::from_draw(a, dr)?;
    distortion_exact_l2_pair(&pair)
}

/// Lower-bound estimate of the sampling error of a draw for general p.
pub fn distortion_estimate(
    a: &Matrix,
    dr: &SampleDraw,
    probes: usize,
    restarts: usize,
    seed: u64,
) -> Result<DistortionReport> {
    let pair = EmbeddingPair::from_draw(a, dr)?;
    Ok(distortion_estimate_pair(&pair, dr.p, probes, restarts, seed))
}

/// Pass/fail subspace-embedding check: the (estimated) sampling error must
/// not exceed eps. Uses the exact route when p = 2.
pub fn check_embedding(
    a: &Matrix,
    dr: &SampleDraw,
    p: f64,
    eps: f64,
    probes: usize,
    restarts: usize,
    seed: u64,
) -> Result<(bool, DistortionReport)> {
    let report = if p == 2.0 {
        distortion_exact_l2(a, dr)?
    } else {
        distortion_estimate(a, dr, probes, restarts, seed)?
    };
    Ok((report.lambda_est <= eps, report))
}

/// Max-sensitivity monotonicity at the vector level: for q >= p > 0,
/// `||y||_inf^p / ||y||_p^p <= ||y||_inf^q / ||y||_q^q` and the reverse bound
/// `||y||_inf^q / ||y||_q^q <= (||y||_inf^p / ||y||_p^p)^{q/p} n^{q/p - 1}`,
/// each with 1e-10 additive slack.
pub fn check_vector_monotonicity(y: &[f64], p: f64, q: f64) -> Result<bool> {
    if !(q >= p && p > 0.0) {
        return Err(Error::InvalidInput(format!(
            "need q >= p > 0, got p = {p}, q = {q}"
        )));
    }
    let m = y.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if m == 0.0 {
        return Err(Error::InvalidInput("zero vector".into()));
    }
    let n = y.len() as f64;
    let ratio = |e: f64| -> f64 {
        let s: f64 = y.iter().map(|v| (v.abs() / m).powf(e)).sum();
        1.0 / s
    };
    let rp = ratio(p);
    let rq = ratio(q);
    let forward = rp <= rq + 1e-10;
    let reverse = rq <= rp.powf(q / p) * n.powf(q / p - 1.0) + 1e-10;
    Ok(forward && reverse)
}

/// Total-sensitivity lower bound: d/2 for p >= 2 and d^{p/2}/2 for p < 2,
/// on full-rank input, with 1e-9 slack.
pub fn check_total_sens_bounds(a: &Matrix, p: f64) -> Result<bool> {
    let basis = matrix::orthonormal_basis(a, matrix::DEFAULT_RANK_TOL)?;
    if basis.rank < a.cols() {
        return Err(Error::RankDeficient { sigma_min: 0.0 });
    }
    let s = scores::lp_sensitivities(a, p, CHECK_SENS_TOL)?;
    let d = a.cols() as f64;
    let bound = if p >= 2.0 { d / 2.0 } else { d.powf(p / 2.0) / 2.0 };
    Ok(s.total() >= bound - 1e-9)
}

/// Perturbation stability: with E drawn at the edge of the spectral bound,
/// the perturbed total sensitivity stays below `2^p (S + 1)`.
pub fn check_perturbation_bound(a: &Matrix, p: f64, seed: u64) -> Result<bool> {
    let perturbed = generators::perturb_within_bound(a, p, seed)?;
    let s_orig = scores::lp_sensitivities(a, p, CHECK_SENS_TOL)?.total();
    let s_pert = scores::lp_sensitivities(&perturbed, p, CHECK_SENS_TOL)?.total();
    Ok(s_pert <= 2.0f64.powf(p) * (s_orig + 1.0) * (1.0 + 1e-6))
}

/// Gaussian matrices have small total lp sensitivity for 1 <= p < 2:
/// `S <= slack * (d ln(d+1))^{p/2}`.
pub fn check_gaussian_small_sens(
    n: usize,
    d: usize,
    p: f64,
    seed: u64,
    slack: f64,
) -> Result<bool> {
    if !(1.0..2.0).contains(&p) {
        return Err(Error::ExponentOutOfRange {
            p,
            required: "1 <= p < 2",
        });
    }
    if n < 256 * d {
        return Err(Error::InvalidInput(format!(
            "need n >= 256 d, got n = {n}, d = {d}"
        )));
    }
    let a = generators::gaussian_matrix(n, d, seed)?;
    let total = scores::lp_sensitivities(&a, p, CHECK_SENS_TOL)?.total();
    let bound = slack * (d as f64 * ((d + 1) as f64).ln()).powf(p / 2.0);
    Ok(total <= bound)
}
