//! Row-splitting transforms that cap per-row scores while preserving lp
//! norms exactly: a row split into k copies of `a_i / k^{1/p}` contributes
//! the same lp mass, but each copy carries a 1/k fraction of the score.
//!
//! Every transform returns the new matrix together with a [`RowMap`] so the
//! split can be audited or undone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scores::{ScoreKind, ScoreVector};

/// Split record for one source row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowMapEntry {
    pub src: usize,
    pub k: usize,
}

/// Per-source-row split counts, in source order. Output rows for source i
/// occupy the contiguous block starting at the sum of earlier counts, each
/// scaled by `k_i^{-1/p}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RowMap {
    pub entries: Vec<RowMapEntry>,
}

impl RowMap {
    pub fn output_rows(&self) -> usize {
        self.entries.iter().map(|e| e.k).sum()
    }

    pub fn source_rows(&self) -> usize {
        self.entries.len()
    }

    /// (source_row, copies, scale) for every output row, in output order.
    pub fn per_output_row(&self, p: f64) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.output_rows());
        for e in &self.entries {
            let scale = (e.k as f64).powf(-1.0 / p);
            for _ in 0..e.k {
                out.push((e.src, e.k, scale));
            }
        }
        out
    }

    /// Undoes a split: takes the first copy of each source group and rescales
    /// by `k^{1/p}`. Exact up to floating-point roundoff of the two scalings.
    pub fn reconstruct(&self, aprime: &Matrix, p: f64) -> Result<Matrix> {
        if aprime.rows() != self.output_rows() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} rows", self.output_rows()),
                got: format!("{}", aprime.rows()),
            });
        }
        let mut rows = Vec::with_capacity(self.entries.len());
        let mut offset = 0usize;
        for e in &self.entries {
            let unscale = (e.k as f64).powf(1.0 / p);
            rows.push(aprime.row(offset).iter().map(|v| v * unscale).collect());
            offset += e.k;
        }
        Matrix::from_rows(&rows)
    }
}

fn split_rows(a: &Matrix, p: f64, counts: &[usize]) -> (Matrix, RowMap) {
    let total: usize = counts.iter().sum();
    let mut out = Matrix::zeros(total, a.cols());
    let mut entries = Vec::with_capacity(a.rows());
    let mut at = 0usize;
    for (i, &k) in counts.iter().enumerate() {
        let scale = (k as f64).powf(-1.0 / p);
        for _ in 0..k {
            let dst = out.row_mut(at);
            for (d, &s) in dst.iter_mut().zip(a.row(i)) {
                *d = scale * s;
            }
            at += 1;
        }
        entries.push(RowMapEntry { src: i, k });
    }
    (out, RowMap { entries })
}

fn check_scores(a: &Matrix, s: &ScoreVector, kind: ScoreKind, p: Option<f64>) -> Result<()> {
    if s.kind != kind {
        return Err(Error::InvalidInput(format!(
            "expected {kind:?} scores, got {:?}",
            s.kind
        )));
    }
    if s.len() != a.rows() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} scores", a.rows()),
            got: format!("{}", s.len()),
        });
    }
    if let Some(p) = p {
        if (s.p - p).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "scores were computed for p = {}, transform uses p = {p}",
                s.p
            )));
        }
    }
    Ok(())
}

/// Splits rows whose lp sensitivity exceeds `C * total/n` by
/// `k_i = ceil(sigma_i / (C * total / n))`. The output has at most
/// `(1 + 1/C) n` rows, preserves `||Ax||_p` exactly, caps every output-row
/// sensitivity at `C * total / n`, and preserves total sensitivity.
pub fn flatten_sensitivities(
    a: &Matrix,
    p: f64,
    c: f64,
    s: &ScoreVector,
) -> Result<(Matrix, RowMap)> {
    if !(c >= 1.0) {
        return Err(Error::InvalidInput("C must be at least 1".into()));
    }
    check_scores(a, s, ScoreKind::LpSensitivity, Some(p))?;
    let total = s.total();
    if total <= 0.0 {
        return Err(Error::AllZeroMatrix);
    }
    let threshold = c * total / a.rows() as f64;
    let counts: Vec<usize> = s
        .values
        .iter()
        .map(|&sig| ((sig / threshold).ceil() as usize).max(1))
        .collect();
    Ok(split_rows(a, p, &counts))
}

/// Splits every row into `k = ceil(1/alpha)` copies, capping every lq
/// sensitivity at `alpha` for all q >= 1 simultaneously. lp norms are
/// preserved exactly; lq norms pick up the factor `k^{1/q - 1/p}`.
pub fn flatten_uniform(a: &Matrix, p: f64, alpha: f64) -> Result<(Matrix, RowMap)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!(
            "alpha must lie in (0,1), got {alpha}"
        )));
    }
    let k = (1.0 / alpha).ceil() as usize;
    let counts = vec![k.max(1); a.rows()];
    Ok(split_rows(a, p, &counts))
}

/// Splits rows with large leverage score by `k_i = ceil(tau_i / (C d / n))`,
/// scaling copies by `k_i^{-1/p}`. Requires p > 2. lp norms are preserved
/// exactly, l2 norms do not decrease, lp sensitivities do not increase, and
/// the max output leverage drops to
/// `(C d / n)^{2/p} (max input leverage)^{1 - 2/p}`.
pub fn flatten_sens_lev(a: &Matrix, p: f64, c: f64, lev: &ScoreVector) -> Result<(Matrix, RowMap)> {
    if !(p > 2.0) {
        return Err(Error::ExponentOutOfRange {
            p,
            required: "p > 2",
        });
    }
    if !(c >= 1.0) {
        return Err(Error::InvalidInput("C must be at least 1".into()));
    }
    check_scores(a, lev, ScoreKind::Leverage, None)?;
    let threshold = c * a.cols() as f64 / a.rows() as f64;
    let counts: Vec<usize> = lev
        .values
        .iter()
        .map(|&tau| ((tau / threshold).ceil() as usize).max(1))
        .collect();
    Ok(split_rows(a, p, &counts))
}
