//! Dense row-major matrices and the exact linear-algebra kernels the rest of
//! the toolkit builds on: pivoted Householder QR, symmetric Jacobi
//! eigendecomposition, spectral norm by power iteration, and overflow-safe
//! lp norms.
//!
//! Everything here is deterministic; there is no stochastic rounding and no
//! hidden state.

use crate::error::{Error, Result};

/// Relative tolerance used to decide numerical rank when the caller does not
/// supply one.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Dense real matrix, row-major storage.
///
/// A matrix with zero rows is permitted (it arises as the result of applying
/// an empty sample draw); all other constructors require at least one row and
/// one column and reject non-finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major entries, validating shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{} entries", rows * cols),
                got: format!("{}", data.len()),
            });
        }
        for (idx, &v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry {
                    row: idx / cols,
                    col: idx % cols,
                });
            }
        }
        Ok(Self { rows, cols, data })
    }

    /// Matrix with no rows. Valid only as the output of a sampling step.
    pub fn empty(cols: usize) -> Self {
        Self {
            rows: 0,
            cols,
            data: Vec::new(),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("no rows supplied".into()));
        }
        let cols = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::ShapeMismatch {
                    expected: format!("{cols} columns"),
                    got: format!("{} in row {i}", r.len()),
                });
            }
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_all_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.get(i, j);
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch {
                expected: format!("{} rows", self.cols),
                got: format!("{}", other.rows),
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{} entries", self.cols),
                got: format!("{}", x.len()),
            });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// Gram matrix `AᵀA`.
    pub fn gram(&self) -> Matrix {
        let d = self.cols;
        let mut g = Matrix::zeros(d, d);
        for i in 0..self.rows {
            let r = self.row(i);
            for a in 0..d {
                let ra = r[a];
                if ra == 0.0 {
                    continue;
                }
                for b in a..d {
                    g.data[a * d + b] += ra * r[b];
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                g.data[a * d + b] = g.data[b * d + a];
            }
        }
        g
    }

    pub fn frobenius_norm(&self) -> f64 {
        lp_norm(&self.data, 2.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| c * v).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", self.rows, self.cols),
                got: format!("{}x{}", other.rows, other.cols),
            });
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.add(&other.scale(-1.0))
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// lp norm `(Σ |v_i|^p)^{1/p}` with overflow-safe rescaling by the max
/// absolute entry. Empty input yields 0.
pub fn lp_norm(v: &[f64], p: f64) -> f64 {
    assert!(p >= 1.0 && p.is_finite(), "lp_norm requires 1 <= p < inf");
    let m = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if m == 0.0 {
        return 0.0;
    }
    let sum: f64 = v.iter().map(|x| (x.abs() / m).powf(p)).sum();
    m * sum.powf(1.0 / p)
}

/// `Σ |v_i|^p` rescaled by `scale` (pass the max absolute entry of the
/// enclosing computation): returns `Σ |v_i / scale|^p`.
pub fn sum_abs_pow_scaled(v: &[f64], p: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        return 0.0;
    }
    v.iter().map(|x| (x.abs() / scale).powf(p)).sum()
}

/// Orthonormal basis of the column space of a matrix.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    /// n x r matrix with orthonormal columns spanning col(A).
    pub u: Matrix,
    /// Numerical rank r.
    pub rank: usize,
    /// Column count of the source matrix.
    pub source_cols: usize,
}

/// Householder QR with column pivoting. Factors `A P = Q R`; rank is decided
/// by pivot magnitude relative to the largest pivot.
struct PivotedQr {
    /// Packed factors: R in the upper triangle, Householder vectors below the
    /// diagonal (v[0] implicitly 1).
    fac: Matrix,
    tau: Vec<f64>,
    perm: Vec<usize>,
    steps: usize,
}

fn householder_qr(a: &Matrix) -> PivotedQr {
    let (n, d) = (a.rows(), a.cols());
    let steps = n.min(d);
    let mut m = a.clone();
    let mut perm: Vec<usize> = (0..d).collect();
    let mut tau = vec![0.0; steps];

    for k in 0..steps {
        // Pivot: bring the column with the largest remaining norm to position k.
        let mut best = k;
        let mut best_norm = 0.0;
        for j in k..d {
            let nj: f64 = (k..n).map(|i| m.get(i, j) * m.get(i, j)).sum();
            if nj > best_norm {
                best_norm = nj;
                best = j;
            }
        }
        if best != k {
            for i in 0..n {
                let t = m.get(i, k);
                m.set(i, k, m.get(i, best));
                m.set(i, best, t);
            }
            perm.swap(k, best);
        }

        let norm_x = best_norm.sqrt();
        if norm_x == 0.0 {
            tau[k] = 0.0;
            continue;
        }

        let x0 = m.get(k, k);
        let alpha = if x0 >= 0.0 { -norm_x } else { norm_x };
        // v = x - alpha e1, normalized so v[0] = 1.
        let v0 = x0 - alpha;
        for i in (k + 1)..n {
            let t = m.get(i, k) / v0;
            m.set(i, k, t);
        }
        tau[k] = -v0 / alpha;
        m.set(k, k, alpha);

        // Apply H = I - tau v vᵀ to the trailing columns.
        for j in (k + 1)..d {
            let mut s = m.get(k, j);
            for i in (k + 1)..n {
                s += m.get(i, k) * m.get(i, j);
            }
            s *= tau[k];
            let mkj = m.get(k, j);
            m.set(k, j, mkj - s);
            for i in (k + 1)..n {
                let t = m.get(i, j) - s * m.get(i, k);
                m.set(i, j, t);
            }
        }
    }

    PivotedQr {
        fac: m,
        tau,
        perm,
        steps,
    }
}

impl PivotedQr {
    fn rank(&self, rank_tol: f64) -> usize {
        let r00 = self.fac.get(0, 0).abs();
        if r00 == 0.0 {
            return 0;
        }
        let mut r = 0;
        for k in 0..self.steps {
            if self.fac.get(k, k).abs() > rank_tol * r00 {
                r = k + 1;
            } else {
                break;
            }
        }
        r
    }

    /// First `r` columns of Q, materialized by applying the stored reflectors.
    fn q_columns(&self, r: usize) -> Matrix {
        let n = self.fac.rows();
        let mut q = Matrix::zeros(n, r);
        for j in 0..r {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            // Q e_j = H_0 H_1 ... H_{s-1} e_j, applied right to left.
            for k in (0..self.steps.min(j + 1)).rev() {
                if self.tau[k] == 0.0 {
                    continue;
                }
                let mut s = e[k];
                for i in (k + 1)..n {
                    s += self.fac.get(i, k) * e[i];
                }
                s *= self.tau[k];
                e[k] -= s;
                for i in (k + 1)..n {
                    e[i] -= s * self.fac.get(i, k);
                }
            }
            for i in 0..n {
                q.set(i, j, e[i]);
            }
        }
        q
    }

    /// Upper-left r x r block of R.
    fn r_block(&self, r: usize) -> Matrix {
        let mut out = Matrix::zeros(r, r);
        for i in 0..r {
            for j in i..r {
                out.set(i, j, self.fac.get(i, j));
            }
        }
        out
    }
}

/// Orthonormal basis for the column space via pivoted Householder QR.
pub fn orthonormal_basis(a: &Matrix, rank_tol: f64) -> Result<OrthonormalBasis> {
    if a.is_empty() || a.is_all_zero() {
        return Err(Error::AllZeroMatrix);
    }
    if !(rank_tol > 0.0) {
        return Err(Error::InvalidInput("rank_tol must be positive".into()));
    }
    let qr = householder_qr(a);
    let rank = qr.rank(rank_tol);
    Ok(OrthonormalBasis {
        u: qr.q_columns(rank),
        rank,
        source_cols: a.cols(),
    })
}

/// Orthonormal basis U together with the map W satisfying `A W = U`
/// (d x r). W parameterizes witnesses: `x = W z` realizes `A x = U z`.
pub fn column_space_map(a: &Matrix, rank_tol: f64) -> Result<(OrthonormalBasis, Matrix)> {
    if a.is_empty() || a.is_all_zero() {
        return Err(Error::AllZeroMatrix);
    }
    let qr = householder_qr(a);
    let rank = qr.rank(rank_tol);
    let u = qr.q_columns(rank);
    let rinv = invert_upper_triangular(&qr.r_block(rank));
    let mut w = Matrix::zeros(a.cols(), rank);
    for j in 0..rank {
        for i in 0..rank {
            w.set(qr.perm[j], i, rinv.get(j, i));
        }
    }
    Ok((
        OrthonormalBasis {
            u,
            rank,
            source_cols: a.cols(),
        },
        w,
    ))
}

fn invert_upper_triangular(r: &Matrix) -> Matrix {
    let n = r.rows();
    let mut inv = Matrix::zeros(n, n);
    for col in 0..n {
        let mut x = vec![0.0; n];
        x[col] = 1.0;
        for i in (0..=col).rev() {
            let mut s = x[i];
            for j in (i + 1)..=col {
                s -= r.get(i, j) * x[j];
            }
            x[i] = s / r.get(i, i);
        }
        for i in 0..n {
            inv.set(i, col, x[i]);
        }
    }
    inv
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order with matching eigenvector columns.
pub fn sym_eigen(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if m.rows() != m.cols() {
        return Err(Error::ShapeMismatch {
            expected: "square matrix".into(),
            got: format!("{}x{}", m.rows(), m.cols()),
        });
    }
    let n = m.rows();
    let mut a = m.clone();
    let mut v = Matrix::identity(n);
    let scale = a.max_abs();
    if scale == 0.0 {
        return Ok((vec![0.0; n], v));
    }
    let tol = 1e-15 * scale;

    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(a.get(i, j).abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(i, i).partial_cmp(&a.get(j, j)).unwrap());
    let eigvals: Vec<f64> = order.iter().map(|&i| a.get(i, i)).collect();
    let mut vecs = Matrix::zeros(n, n);
    for (new_j, &old_j) in order.iter().enumerate() {
        for i in 0..n {
            vecs.set(i, new_j, v.get(i, old_j));
        }
    }
    Ok((eigvals, vecs))
}

/// Pseudo-inverse of the Gram matrix `AᵀA` via symmetric eigendecomposition.
/// Eigenvalues at or below `rank_tol` times the largest are treated as zero.
pub fn gram_pinv(a: &Matrix, rank_tol: f64) -> Result<Matrix> {
    if a.is_empty() || a.is_all_zero() {
        return Err(Error::AllZeroMatrix);
    }
    if !(rank_tol > 0.0) {
        return Err(Error::InvalidInput("rank_tol must be positive".into()));
    }
    let g = a.gram();
    let (vals, vecs) = sym_eigen(&g)?;
    let lmax = vals.last().copied().unwrap_or(0.0).max(0.0);
    let d = a.cols();
    let mut out = Matrix::zeros(d, d);
    for k in 0..d {
        let lam = vals[k];
        if lam <= rank_tol * lmax {
            continue;
        }
        let inv = 1.0 / lam;
        for i in 0..d {
            let vik = vecs.get(i, k);
            if vik == 0.0 {
                continue;
            }
            for j in 0..d {
                let t = out.get(i, j) + inv * vik * vecs.get(j, k);
                out.set(i, j, t);
            }
        }
    }
    Ok(out)
}

/// Smallest and largest singular values, from the eigenvalues of `AᵀA`.
pub fn singular_extremes(a: &Matrix) -> Result<(f64, f64)> {
    let (vals, _) = sym_eigen(&a.gram())?;
    let max = vals.last().copied().unwrap_or(0.0).max(0.0);
    let min = vals.first().copied().unwrap_or(0.0).max(0.0);
    Ok((min.sqrt(), max.sqrt()))
}

/// Spectral norm by power iteration on `AᵀA`, to 1e-6 relative accuracy.
/// Deterministic start vector; falls back over basis vectors if the start
/// is annihilated.
pub fn spectral_norm_power(a: &Matrix) -> f64 {
    if a.is_empty() || a.is_all_zero() {
        return 0.0;
    }
    let g = a.gram();
    let d = g.rows();
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + (i as f64) * 1e-3).collect();
    normalize(&mut v);
    let mut lambda = 0.0f64;
    for _ in 0..100_000 {
        let mut gv = g.matvec(&v).expect("square gram");
        let norm = lp_norm(&gv, 2.0);
        if norm == 0.0 {
            // start vector happened to be in the null space; perturb
            for (i, x) in v.iter_mut().enumerate() {
                *x += ((i * 2654435761) % 97) as f64 / 97.0 + 1e-3;
            }
            normalize(&mut v);
            continue;
        }
        for x in gv.iter_mut() {
            *x /= norm;
        }
        let new_lambda = norm;
        let done = (new_lambda - lambda).abs() <= 1e-7 * new_lambda.max(f64::MIN_POSITIVE);
        v = gv;
        lambda = new_lambda;
        if done {
            break;
        }
    }
    lambda.sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = lp_norm(v, 2.0);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}

// ---------------------------------------------------------------------------
// CSV interchange: one row per line, comma-separated decimals, no header.
// ---------------------------------------------------------------------------

/// Parses the matrix CSV format. Ragged rows are rejected.
pub fn parse_matrix_csv(text: &str) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut cols = None;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|e| Error::CsvParse {
                    line: lineno + 1,
                    detail: format!("{tok:?}: {e}"),
                })
            })
            .collect::<Result<_>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::CsvParse {
                    line: lineno + 1,
                    detail: format!("ragged row: expected {c} fields, got {}", row.len()),
                })
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("empty csv".into()));
    }
    Matrix::from_rows(&rows)
}

pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row = m.row(i);
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    out
}

pub fn read_matrix_csv(path: &std::path::Path) -> Result<Matrix> {
    parse_matrix_csv(&std::fs::read_to_string(path)?)
}

pub fn write_matrix_csv(path: &std::path::Path, m: &Matrix) -> Result<()> {
    std::fs::write(path, matrix_to_csv(m))?;
    Ok(())
}
