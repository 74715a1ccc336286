//! Per-row importance scores: l2 leverage scores, exact lp sensitivities via
//! constrained IRLS, Lewis weights for 1 <= p < 4, and total sensitivity.
//!
//! The sensitivity of row i is the largest fraction of `||Ax||_p^p` that
//! coordinate i can carry. It is computed through the dual problem
//! `1/sigma_i = min ||Ax||_p^p subject to [Ax](i) = 1`, solved in an
//! orthonormal basis U of col(A) so the iteration stays well conditioned:
//! each IRLS step reweights by the current residual and solves the
//! equality-constrained weighted least-squares step in closed form with a
//! single Lagrange multiplier.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{self, dot, Matrix};

/// Default relative-objective convergence tolerance for the IRLS solver.
pub const DEFAULT_SENS_TOL: f64 = 1e-8;
/// IRLS iteration cap.
pub const MAX_IRLS_ITER: usize = 500;
/// Residual floor factor: weights are computed from max(|r_j|, floor) with
/// floor = `EPS_FLOOR_FACTOR * ||r||_inf`.
const EPS_FLOOR_FACTOR: f64 = 1e-12;
/// Rows of U with norm below this are treated as identically zero.
const ZERO_ROW_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Leverage,
    LpSensitivity,
    Lewis,
}

/// Per-row nonnegative scores with their kind and the exponent they were
/// computed for. `cols` records the width of the source matrix so totals can
/// be compared against dimension-dependent bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub values: Vec<f64>,
    pub kind: ScoreKind,
    pub p: f64,
    /// Achieved tolerance: 0 for exact routes, the convergence tolerance for
    /// iterative ones.
    pub tol: f64,
    pub cols: usize,
}

impl ScoreVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TotalSensitivity {
    pub value: f64,
    pub p: f64,
    pub n: usize,
    pub d: usize,
}

/// Leverage scores: squared row norms of an orthonormal basis of col(A).
/// They sum to rank(A).
pub fn leverage_scores(a: &Matrix) -> Result<ScoreVector> {
    let basis = matrix::orthonormal_basis(a, matrix::DEFAULT_RANK_TOL)?;
    let values = (0..a.rows())
        .map(|i| {
            let r = basis.u.row(i);
            dot(r, r).min(1.0)
        })
        .collect();
    Ok(ScoreVector {
        values,
        kind: ScoreKind::Leverage,
        p: 2.0,
        tol: 0.0,
        cols: a.cols(),
    })
}

/// Sum of the scores with metadata. Lewis weights are not sensitivities, so
/// they are rejected here.
pub fn total_sensitivity(s: &ScoreVector) -> Result<TotalSensitivity> {
    if s.kind == ScoreKind::Lewis {
        return Err(Error::InvalidInput(
            "total_sensitivity expects leverage or lp_sensitivity scores".into(),
        ));
    }
    Ok(TotalSensitivity {
        value: s.total(),
        p: s.p,
        n: s.len(),
        d: s.cols,
    })
}

/// lp sensitivity of a single row, building the basis internally.
pub fn lp_sensitivity_row(a: &Matrix, i: usize, p: f64, tol: f64) -> Result<f64> {
    check_exponent(p)?;
    let basis = matrix::orthonormal_basis(a, matrix::DEFAULT_RANK_TOL)?;
    lp_sensitivity_row_in_basis(&basis.u, i, p, tol)
}

/// All lp sensitivities of a matrix. Rows are independent and solved in
/// parallel; the result does not depend on execution order.
pub fn lp_sensitivities(a: &Matrix, p: f64, tol: f64) -> Result<ScoreVector> {
    check_exponent(p)?;
    let basis = matrix::orthonormal_basis(a, matrix::DEFAULT_RANK_TOL)?;
    let values: Vec<f64> = (0..a.rows())
        .into_par_iter()
        .map(|i| {
            lp_sensitivity_row_in_basis(&basis.u, i, p, tol).map_err(|e| Error::ScoreRow {
                row: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    Ok(ScoreVector {
        values,
        kind: ScoreKind::LpSensitivity,
        p,
        tol,
        cols: a.cols(),
    })
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::ExponentOutOfRange {
            p,
            required: "1 <= p < inf",
        });
    }
    Ok(())
}

/// Solves `1/sigma_i = min ||Uz||_p^p subject to [Uz](i) = 1` by damped IRLS
/// and returns `sigma_i`, clamped to [0,1].
pub fn lp_sensitivity_row_in_basis(u: &Matrix, i: usize, p: f64, tol: f64) -> Result<f64> {
    irls_solve(u, i, p, tol).map(|(sigma, _)| sigma)
}

/// Sensitivity together with the minimizer coordinates in the basis
/// parameterization, for stationarity-certificate checks.
pub fn lp_sensitivity_row_with_minimizer(
    u: &Matrix,
    i: usize,
    p: f64,
    tol: f64,
) -> Result<(f64, Vec<f64>)> {
    irls_solve(u, i, p, tol)
}

fn irls_solve(u: &Matrix, i: usize, p: f64, tol: f64) -> Result<(f64, Vec<f64>)> {
    check_exponent(p)?;
    let ui = u.row(i).to_vec();
    let ui_norm2 = dot(&ui, &ui);
    if ui_norm2.sqrt() < ZERO_ROW_TOL {
        // the 0/0 fraction is defined to be 0
        return Ok((0.0, vec![0.0; u.cols()]));
    }

    // Feasible start: the minimum-l2-norm solution, which is already the
    // exact optimum for p = 2.
    let mut z: Vec<f64> = ui.iter().map(|v| v / ui_norm2).collect();
    let mut resid = u.matvec(&z)?;
    let mut obj = objective(&resid, p);
    let eta0 = if p > 2.0 {
        (2.0 / (p - 1.0)).min(1.0)
    } else {
        1.0
    };
    // The IRLS contraction factor degrades to 1 as p approaches 3, so for
    // p > 1 the IRLS phase runs only until it stalls and a damped Newton
    // phase (same weighted matrix, true-Hessian scaling) finishes to tol.
    let irls_tol = if p > 1.0 { tol.max(1e-6) } else { tol };

    let r = u.cols();
    let mut iterations = 0usize;
    let mut last_rel = f64::INFINITY;
    while iterations < MAX_IRLS_ITER {
        iterations += 1;
        // For p = 1 the sharp floor makes plain IRLS crawl; a smoothing path
        // anneals the floor down to its final value, and convergence is only
        // tested once the sharp floor is active.
        let floor_factor = if p == 1.0 {
            (1e-2 * 0.5f64.powi(iterations as i32)).max(EPS_FLOOR_FACTOR)
        } else {
            EPS_FLOOR_FACTOR
        };
        let sharp = floor_factor == EPS_FLOOR_FACTOR;
        let m = weighted_normal_matrix_with_floor(u, &resid, p, floor_factor);

        // z* = M^{-1} u_i / (u_iᵀ M^{-1} u_i) keeps the constraint exact
        let y = solve_spd(&m, r, &ui)?;
        let denom = dot(&ui, &y);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let z_star: Vec<f64> = y.iter().map(|v| v / denom).collect();

        // damped step with halving on objective increase
        let mut eta = eta0;
        let mut accepted = false;
        for _ in 0..30 {
            let z_try: Vec<f64> = z
                .iter()
                .zip(&z_star)
                .map(|(zc, zs)| zc + eta * (zs - zc))
                .collect();
            let r_try = u.matvec(&z_try)?;
            let obj_try = objective(&r_try, p);
            if obj_try <= obj {
                last_rel = (obj - obj_try) / obj.max(f64::MIN_POSITIVE);
                z = z_try;
                resid = r_try;
                obj = obj_try;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            // no descent available: stationary up to float noise
            last_rel = 0.0;
        }
        if sharp && last_rel < irls_tol {
            break;
        }
    }

    if p > 1.0 {
        // a damped step can undershoot tol without being stationary, so the
        // Newton phase always decides convergence for smooth exponents
        if let Some((obj_final, z_final)) = newton_polish(
            u,
            &ui,
            z.clone(),
            resid,
            obj,
            p,
            tol,
            (MAX_IRLS_ITER - iterations).max(30),
        )? {
            return Ok(((1.0 / obj_final).clamp(0.0, 1.0), z_final));
        }
    } else {
        // p = 1: the optimum sits at a vertex with rank(U) - 1 zero
        // residuals; solving for the vertex that the IRLS iterate approaches
        // lands exactly on it
        if let Some((obj_v, z_v)) = l1_vertex_polish(u, i, &resid, obj)? {
            return Ok(((1.0 / obj_v).clamp(0.0, 1.0), z_v));
        }
        if last_rel < tol {
            return Ok(((1.0 / obj).clamp(0.0, 1.0), z));
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_IRLS_ITER,
        best: (1.0 / obj).clamp(0.0, 1.0),
        residual: last_rel,
    })
}

/// Vertex polish for `min ||Uz||_1 s.t. [Uz](i) = 1`: an optimum sits at a
/// vertex with rank(U) - 1 zero residuals. Starting from the active set the
/// IRLS residual suggests, descend by single-row exchanges until no swap
/// improves the objective. Returns the vertex only when it is at least as
/// good as the iterate it polishes.
fn l1_vertex_polish(
    u: &Matrix,
    i: usize,
    resid: &[f64],
    obj: f64,
) -> Result<Option<(f64, Vec<f64>)>> {
    let r = u.cols();
    let mut order: Vec<usize> = (0..u.rows()).filter(|j| *j != i).collect();
    order.sort_by(|&a, &b| {
        resid[a]
            .abs()
            .partial_cmp(&resid[b].abs())
            .expect("finite residuals")
    });

    let solve_vertex = |active: &[usize]| -> Option<(f64, Vec<f64>)> {
        let mut m = Matrix::zeros(r, r);
        for c in 0..r {
            m.set(0, c, u.get(i, c));
        }
        for (row_idx, &j) in active.iter().enumerate() {
            for c in 0..r {
                m.set(row_idx + 1, c, u.get(j, c));
            }
        }
        let mut rhs = vec![0.0; r];
        rhs[0] = 1.0;
        let z = solve_square(&m, &rhs)?;
        let resid_v = u.matvec(&z).ok()?;
        let obj_v = objective(&resid_v, 1.0);
        if obj_v.is_finite() && obj_v > 0.0 {
            Some((obj_v, z))
        } else {
            None
        }
    };

    // greedy initial active set: smallest residuals whose rows extend the
    // rank of the system (checked by incremental orthogonalization)
    let mut active: Vec<usize> = Vec::with_capacity(r - 1);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(r);
    let extends_rank = |basis: &mut Vec<Vec<f64>>, row: &[f64]| -> bool {
        let mut v = row.to_vec();
        for b in basis.iter() {
            let c = dot(&v, b);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= c * bi;
            }
        }
        let norm = matrix::lp_norm(&v, 2.0);
        if norm > 1e-9 * matrix::lp_norm(row, 2.0).max(1e-300) {
            for vi in v.iter_mut() {
                *vi /= norm;
            }
            basis.push(v);
            true
        } else {
            false
        }
    };
    extends_rank(&mut basis, u.row(i));
    for &j in &order {
        if active.len() == r - 1 {
            break;
        }
        if extends_rank(&mut basis, u.row(j)) {
            active.push(j);
        }
    }
    if active.len() < r - 1 {
        return Ok(None);
    }
    let Some(mut best_val) = solve_vertex(&active) else {
        return Ok(None);
    };

    // local descent over single-row exchanges with nearby candidates
    let pool: Vec<usize> = order.iter().copied().take(4 * r + 8).collect();
    for _ in 0..60 {
        let mut improved = false;
        'outer: for slot in 0..active.len() {
            for &cand in &pool {
                if active.contains(&cand) {
                    continue;
                }
                let old = active[slot];
                active[slot] = cand;
                if let Some((obj_v, z_v)) = solve_vertex(&active) {
                    if obj_v < best_val.0 * (1.0 - 1e-14) {
                        best_val = (obj_v, z_v);
                        improved = true;
                        break 'outer;
                    }
                }
                active[slot] = old;
            }
        }
        if !improved {
            break;
        }
    }

    if best_val.0 <= obj * (1.0 + 1e-12) {
        Ok(Some(best_val))
    } else {
        Ok(None)
    }
}

fn solve_square(m: &Matrix, rhs: &[f64]) -> Option<Vec<f64>> {
    let n = m.rows();
    let mut a = m.clone();
    let mut b = rhs.to_vec();
    for col in 0..n {
        let mut piv = col;
        for row in (col + 1)..n {
            if a.get(row, col).abs() > a.get(piv, col).abs() {
                piv = row;
            }
        }
        if a.get(piv, col).abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for c in 0..n {
                let t = a.get(col, c);
                a.set(col, c, a.get(piv, c));
                a.set(piv, c, t);
            }
            b.swap(col, piv);
        }
        for row in (col + 1)..n {
            let f = a.get(row, col) / a.get(col, col);
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                let t = a.get(row, c) - f * a.get(col, c);
                a.set(row, c, t);
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for c in (row + 1)..n {
            s -= a.get(row, c) * x[c];
        }
        x[row] = s / a.get(row, row);
    }
    Some(x)
}

fn weighted_normal_matrix(u: &Matrix, resid: &[f64], p: f64) -> Vec<f64> {
    weighted_normal_matrix_with_floor(u, resid, p, EPS_FLOOR_FACTOR)
}

fn weighted_normal_matrix_with_floor(
    u: &Matrix,
    resid: &[f64],
    p: f64,
    floor_factor: f64,
) -> Vec<f64> {
    let r = u.cols();
    let rinf = resid.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = floor_factor * rinf;
    let mut m = vec![0.0f64; r * r];
    for (j, rj) in resid.iter().enumerate() {
        let w = rj.abs().max(floor).powf(p - 2.0);
        let row = u.row(j);
        for a in 0..r {
            let wa = w * row[a];
            if wa == 0.0 {
                continue;
            }
            for b in a..r {
                m[a * r + b] += wa * row[b];
            }
        }
    }
    for a in 0..r {
        for b in 0..a {
            m[a * r + b] = m[b * r + a];
        }
    }
    m
}

/// Damped Newton on the smooth objective with the constraint eliminated via
/// one multiplier: H = p(p-1) Uᵀ W U, g = p Uᵀ sign(r)|r|^{p-1}, step d with
/// u_iᵀ d = 0. Returns None if the iteration budget runs out before reaching
/// tol.
#[allow(clippy::too_many_arguments)]
fn newton_polish(
    u: &Matrix,
    ui: &[f64],
    mut z: Vec<f64>,
    mut resid: Vec<f64>,
    mut obj: f64,
    p: f64,
    tol: f64,
    budget: usize,
) -> Result<Option<(f64, Vec<f64>)>> {
    let r = u.cols();
    let mut subtol_streak = 0usize;
    for _ in 0..budget {
        let m = weighted_normal_matrix(u, &resid, p);
        let h: Vec<f64> = m.iter().map(|v| p * (p - 1.0) * v).collect();
        let mut g = vec![0.0f64; r];
        for (j, rj) in resid.iter().enumerate() {
            if *rj == 0.0 {
                continue;
            }
            let c = p * rj.signum() * rj.abs().powf(p - 1.0);
            let row = u.row(j);
            for a in 0..r {
                g[a] += c * row[a];
            }
        }
        let y1 = solve_spd(&h, r, &g)?;
        let y2 = solve_spd(&h, r, ui)?;
        let denom = dot(ui, &y2);
        if denom == 0.0 || !denom.is_finite() {
            return Ok(None);
        }
        let mu = dot(ui, &y1) / denom;
        let d: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| -a + mu * b).collect();
        let slope = dot(&g, &d);
        if slope >= 0.0 {
            // ascent direction only at stationarity
            return Ok(Some((obj, z)));
        }

        let mut t = 1.0;
        let mut stepped = false;
        for _ in 0..40 {
            let z_try: Vec<f64> = z.iter().zip(&d).map(|(zc, dc)| zc + t * dc).collect();
            let r_try = u.matvec(&z_try)?;
            let obj_try = objective(&r_try, p);
            if obj_try <= obj + 1e-4 * t * slope {
                let rel = (obj - obj_try) / obj.max(f64::MIN_POSITIVE);
                z = z_try;
                resid = r_try;
                obj = obj_try;
                stepped = true;
                // near the optimum Newton takes full steps; a sub-tol change
                // on a damped step alone does not certify convergence
                if rel < tol && t == 1.0 {
                    return Ok(Some((obj, z)));
                }
                subtol_streak = if rel < tol { subtol_streak + 1 } else { 0 };
                if subtol_streak >= 2 {
                    return Ok(Some((obj, z)));
                }
                break;
            }
            t *= 0.5;
        }
        if !stepped {
            return Ok(Some((obj, z)));
        }
    }
    Ok(None)
}

fn objective(resid: &[f64], p: f64) -> f64 {
    let m = resid.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if m == 0.0 {
        return 0.0;
    }
    m.powf(p) * matrix::sum_abs_pow_scaled(resid, p, m)
}

/// Cholesky solve with eigendecomposition fallback for near-singular systems.
fn solve_spd(m: &[f64], n: usize, b: &[f64]) -> Result<Vec<f64>> {
    if let Some(x) = cholesky_solve(m, n, b) {
        return Ok(x);
    }
    // fall back to pseudo-inverse via Jacobi
    let mm = Matrix::new(n, n, m.to_vec())
        .map_err(|_| Error::InvalidInput("non-finite weighted normal matrix".into()))?;
    let (vals, vecs) = matrix::sym_eigen(&mm)?;
    let lmax = vals.iter().fold(0.0f64, |a, v| a.max(*v));
    let cut = lmax * 1e-300_f64.max(f64::EPSILON * 1e3);
    let mut x = vec![0.0; n];
    for k in 0..n {
        if vals[k] <= cut {
            continue;
        }
        let mut proj = 0.0;
        for i in 0..n {
            proj += vecs.get(i, k) * b[i];
        }
        proj /= vals[k];
        for i in 0..n {
            x[i] += proj * vecs.get(i, k);
        }
    }
    Ok(x)
}

fn cholesky_solve(m: &[f64], n: usize, b: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    // forward then backward substitution
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}

/// KKT stationarity residual of `min ||Uz||_p^p s.t. [Uz](i) = 1` at `z`:
/// the relative norm of the gradient component orthogonal to the constraint
/// normal. For p = 1 the subdifferential at near-zero residual coordinates is
/// used, choosing the valid subgradient that minimizes the residual.
pub fn kkt_residual(u: &Matrix, z: &[f64], i: usize, p: f64) -> Result<f64> {
    let resid = u.matvec(z)?;
    let r = u.cols();
    let ui = u.row(i);
    let rinf = resid.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    if p > 1.0 {
        let mut g = vec![0.0; r];
        for (j, rj) in resid.iter().enumerate() {
            let h = p * rj.signum() * rj.abs().powf(p - 1.0);
            if h == 0.0 {
                continue;
            }
            let row = u.row(j);
            for a in 0..r {
                g[a] += h * row[a];
            }
        }
        let gnorm = matrix::lp_norm(&g, 2.0);
        if gnorm == 0.0 {
            return Ok(0.0);
        }
        let lambda = dot(&g, ui) / dot(ui, ui);
        let res: Vec<f64> = g.iter().zip(ui).map(|(gc, uc)| gc - lambda * uc).collect();
        return Ok(matrix::lp_norm(&res, 2.0) / gnorm);
    }

    // p = 1: coordinates with |r_j| near zero carry a free subgradient in
    // [-1, 1]; pick the choice (and lambda) minimizing the residual, then
    // clamp.
    let zero_tol = 1e-8 * rinf;
    let mut g_fixed = vec![0.0; r];
    let mut free_rows: Vec<usize> = Vec::new();
    for (j, rj) in resid.iter().enumerate() {
        if rj.abs() <= zero_tol {
            free_rows.push(j);
        } else {
            let s = rj.signum();
            let row = u.row(j);
            for a in 0..r {
                g_fixed[a] += s * row[a];
            }
        }
    }
    let k = free_rows.len() + 1;
    // columns: u_j rows for free coordinates, then -u_i for lambda
    let mut bmat = Matrix::zeros(r, k);
    for (c, &j) in free_rows.iter().enumerate() {
        for a in 0..r {
            bmat.set(a, c, u.get(j, a));
        }
    }
    for a in 0..r {
        bmat.set(a, k - 1, -ui[a]);
    }
    // least squares B theta = -g_fixed via normal equations
    let bt = bmat.transpose();
    let btb = bt.matmul(&bmat)?;
    let rhs: Vec<f64> = {
        let neg: Vec<f64> = g_fixed.iter().map(|v| -v).collect();
        bt.matvec(&neg)?
    };
    let mut theta = solve_spd(btb.data(), k, &rhs)?;
    for t in theta.iter_mut().take(k - 1) {
        *t = t.clamp(-1.0, 1.0);
    }
    let mut res = g_fixed.clone();
    for (c, &j) in free_rows.iter().enumerate() {
        let row = u.row(j);
        for a in 0..r {
            res[a] += theta[c] * row[a];
        }
    }
    for a in 0..r {
        res[a] -= theta[k - 1] * ui[a];
    }
    let scale = matrix::lp_norm(&g_fixed, 2.0).max(1.0);
    Ok(matrix::lp_norm(&res, 2.0) / scale)
}

/// Lewis weights by fixed-point iteration
/// `w_i <- (a_iᵀ (Aᵀ W^{1-2/p} A)^{-1} a_i)^{p/2}`, supported for
/// 1 <= p < 4 where the iteration contracts. At the fixed point the weights
/// sum to d on full-rank input.
pub fn lewis_weights(a: &Matrix, p: f64, tol: f64, max_iter: usize) -> Result<ScoreVector> {
    if !(1.0..4.0).contains(&p) {
        return Err(Error::UnsupportedExponent {
            p,
            detail: "lewis weights are computed only for 1 <= p < 4",
        });
    }
    let basis = matrix::orthonormal_basis(a, matrix::DEFAULT_RANK_TOL)?;
    if basis.rank < a.cols() {
        return Err(Error::RankDeficient { sigma_min: 0.0 });
    }
    let n = a.rows();
    let d = a.cols();

    let max_row_norm = (0..n)
        .map(|i| matrix::lp_norm(a.row(i), 2.0))
        .fold(0.0f64, f64::max);
    let live: Vec<bool> = (0..n)
        .map(|i| matrix::lp_norm(a.row(i), 2.0) > ZERO_ROW_TOL * max_row_norm)
        .collect();

    // leverage scores make a positive, already-correct-at-p=2 start
    let mut w: Vec<f64> = leverage_scores(a)?.values;
    for (i, alive) in live.iter().enumerate() {
        if !alive {
            w[i] = 0.0;
        }
    }

    let expo = 1.0 - 2.0 / p;
    let mut best_resid = f64::INFINITY;
    for _iter in 0..max_iter {
        let mut m = Matrix::zeros(d, d);
        for i in 0..n {
            if !live[i] {
                continue;
            }
            let c = w[i].powf(expo);
            let row = a.row(i);
            for x in 0..d {
                let cx = c * row[x];
                if cx == 0.0 {
                    continue;
                }
                for y in x..d {
                    let t = m.get(x, y) + cx * row[y];
                    m.set(x, y, t);
                }
            }
        }
        for x in 0..d {
            for y in 0..x {
                m.set(x, y, m.get(y, x));
            }
        }
        let (vals, vecs) = matrix::sym_eigen(&m)?;
        let lmax = vals.iter().fold(0.0f64, |acc, v| acc.max(*v));
        let cut = lmax * 1e-14;
        let mut resid = 0.0f64;
        let mut w_new = w.clone();
        for i in 0..n {
            if !live[i] {
                continue;
            }
            let row = a.row(i);
            // quadratic form through the eigenbasis
            let mut quad = 0.0;
            for kk in 0..d {
                if vals[kk] <= cut {
                    continue;
                }
                let mut proj = 0.0;
                for x in 0..d {
                    proj += vecs.get(x, kk) * row[x];
                }
                quad += proj * proj / vals[kk];
            }
            let wi = quad.max(0.0).powf(p / 2.0);
            resid = resid.max((wi / w[i] - 1.0).abs());
            w_new[i] = wi;
        }
        w = w_new;
        best_resid = best_resid.min(resid);
        if resid <= tol {
            let values: Vec<f64> = w.iter().map(|v| v.clamp(0.0, 1.0)).collect();
            return Ok(ScoreVector {
                values,
                kind: ScoreKind::Lewis,
                p,
                tol: resid,
                cols: d,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        best: 0.0,
        residual: best_resid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::gaussian_matrix;

    fn ones(n: usize) -> Matrix {
        Matrix::new(n, 1, vec![1.0; n]).unwrap()
    }

    #[test]
    fn leverage_identity_and_ones() {
        let lev = leverage_scores(&Matrix::identity(3)).unwrap();
        assert_eq!(lev.values, vec![1.0, 1.0, 1.0]);

        let lev = leverage_scores(&ones(4)).unwrap();
        for v in &lev.values {
            assert!((v - 0.25).abs() < 1e-12);
        }
        assert!((lev.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn leverage_hand_computed() {
        let a = Matrix::new(3, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let lev = leverage_scores(&a).unwrap();
        for v in &lev.values {
            assert!((v - 2.0 / 3.0).abs() < 1e-10, "{v}");
        }
    }

    #[test]
    fn sensitivity_identity_is_one() {
        for p in [1.0, 1.5, 2.0, 3.0, 4.0] {
            let s = lp_sensitivities(&Matrix::identity(3), p, 1e-10).unwrap();
            for v in &s.values {
                assert!((v - 1.0).abs() < 1e-8, "p={p} v={v}");
            }
        }
    }

    #[test]
    fn sensitivity_ones_column() {
        for p in [1.0, 1.5, 3.0] {
            let s = lp_sensitivities(&ones(5), p, 1e-10).unwrap();
            for v in &s.values {
                assert!((v - 0.2).abs() < 1e-7, "p={p} v={v}");
            }
        }
    }

    #[test]
    fn sensitivity_single_column_closed_form() {
        // |a_i|^p / ||a||_p^p for a single column
        let a = Matrix::new(2, 1, vec![1.0, 2.0]).unwrap();
        let s = lp_sensitivities(&a, 1.0, 1e-10).unwrap();
        assert!((s.values[0] - 1.0 / 3.0).abs() < 1e-8);
        assert!((s.values[1] - 2.0 / 3.0).abs() < 1e-8);

        let a = Matrix::new(3, 1, vec![1.0, 1.0, 2.0]).unwrap();
        let s = lp_sensitivities(&a, 1.0, 1e-10).unwrap();
        assert!((s.values[0] - 0.25).abs() < 1e-8);
        assert!((s.values[1] - 0.25).abs() < 1e-8);
        assert!((s.values[2] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn p2_sensitivities_match_leverage() {
        let a = gaussian_matrix(60, 4, 21).unwrap();
        let lev = leverage_scores(&a).unwrap();
        let s = lp_sensitivities(&a, 2.0, 1e-10).unwrap();
        for (x, y) in s.values.iter().zip(&lev.values) {
            assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
    }

    #[test]
    fn leverage_total_is_rank() {
        let a = gaussian_matrix(120, 6, 2).unwrap();
        let t = total_sensitivity(&leverage_scores(&a).unwrap()).unwrap();
        assert!((t.value - 6.0).abs() < 1e-6);
        assert_eq!(t.d, 6);
        assert_eq!(t.n, 120);
    }

    #[test]
    fn zero_row_has_zero_sensitivity() {
        let a = Matrix::new(3, 2, vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let s = lp_sensitivities(&a, 3.0, 1e-8).unwrap();
        assert_eq!(s.values[1], 0.0);
        assert!((s.values[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn kkt_certificate_holds_at_minimizer() {
        let a = gaussian_matrix(30, 4, 77).unwrap();
        let basis = matrix::orthonormal_basis(&a, 1e-10).unwrap();
        for p in [1.0, 1.5, 2.0, 3.0, 4.0] {
            for i in [0usize, 7, 19] {
                let (_, z) = lp_sensitivity_row_with_minimizer(&basis.u, i, p, 1e-12).unwrap();
                let res = kkt_residual(&basis.u, &z, i, p).unwrap();
                assert!(res < 1e-5, "p={p} row={i} kkt residual {res}");
            }
        }
    }

    #[test]
    fn lewis_matches_leverage_at_p2() {
        let a = gaussian_matrix(40, 3, 5).unwrap();
        let lev = leverage_scores(&a).unwrap();
        let lw = lewis_weights(&a, 2.0, 1e-10, 100).unwrap();
        for (x, y) in lw.values.iter().zip(&lev.values) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn lewis_identity_and_uniform() {
        let lw = lewis_weights(&Matrix::identity(4), 1.5, 1e-10, 200).unwrap();
        for v in &lw.values {
            assert!((v - 1.0).abs() < 1e-8);
        }

        let lw = lewis_weights(&ones(4), 1.0, 1e-10, 400).unwrap();
        for v in &lw.values {
            assert!((v - 0.25).abs() < 1e-6, "{v}");
        }
    }

    #[test]
    fn lewis_sums_to_d() {
        for p in [1.0, 1.5, 3.0, 3.5] {
            let a = gaussian_matrix(80, 4, 31).unwrap();
            let lw = lewis_weights(&a, p, 1e-9, 500).unwrap();
            assert!((lw.total() - 4.0).abs() < 1e-4, "p={p} total={}", lw.total());
        }
    }

    #[test]
    fn lewis_rejects_p_out_of_range() {
        let a = gaussian_matrix(10, 2, 1).unwrap();
        assert!(matches!(
            lewis_weights(&a, 4.0, 1e-8, 100),
            Err(Error::UnsupportedExponent { .. })
        ));
        assert!(matches!(
            lewis_weights(&a, 0.5, 1e-8, 100),
            Err(Error::UnsupportedExponent { .. })
        ));
    }

    #[test]
    fn total_sensitivity_rejects_lewis() {
        let a = gaussian_matrix(10, 2, 1).unwrap();
        let lw = lewis_weights(&a, 2.0, 1e-8, 100).unwrap();
        assert!(total_sensitivity(&lw).is_err());
    }
}
