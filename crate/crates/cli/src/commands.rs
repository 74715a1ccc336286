//! Command implementations shared by the binary and the test harness.
//!
//! Every command is reproducible: the emitted JSON depends only on the
//! resolved configuration. Wall-clock timings go to a separate `.meta.json`
//! sidecar so the primary outputs stay byte-identical across runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lpcoreset_core::error::Error as CoreError;
use lpcoreset_core::flatten::{self, RowMap};
use lpcoreset_core::matrix::{self, Matrix};
use lpcoreset_core::sampling::{self, PlanMethod, SampleDraw, SamplingPlan};
use lpcoreset_core::scores::{self, ScoreKind, ScoreVector};
use lpcoreset_core::verify::{self, DistortionReport};

use crate::config::{AlphaChoice, RunConfig, Source, TransformKind};
use crate::CliError;

/// Trial seeds derive from the top-level seed as `seed + i` with 1-based i,
/// keeping the generator stream (which uses the seed itself) distinct.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed.wrapping_add(trial as u64 + 1)
}

/// Score record wire format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub kind: ScoreKind,
    pub p: f64,
    pub tol: f64,
    pub values: Vec<f64>,
    pub total: f64,
}

impl From<&ScoreVector> for ScoreRecord {
    fn from(s: &ScoreVector) -> Self {
        ScoreRecord {
            kind: s.kind,
            p: s.p,
            tol: s.tol,
            values: s.values.clone(),
            total: s.total(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub rows_kept: usize,
    pub lambda_est: f64,
    pub total_sens: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsRun {
    pub eps: f64,
    pub trials: Vec<TrialRecord>,
    pub median_rows: f64,
    pub p25_rows: f64,
    pub p75_rows: f64,
    pub median_lambda: f64,
    pub budget_exhausted: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: BTreeMap<String, String>,
    pub runs: Vec<EpsRun>,
    /// Fitted slope of log(median rows) against log(1/eps), over runs whose
    /// calibration stayed within budget.
    pub slope: Option<f64>,
}

pub fn load_matrix(cfg: &RunConfig) -> Result<Matrix, CliError> {
    match &cfg.source {
        Source::Generator(spec) => Ok(spec.build()?),
        Source::Input(path) => Ok(matrix::read_matrix_csv(path)?),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn require_out(cfg: &RunConfig) -> Result<&PathBuf, CliError> {
    cfg.out
        .as_ref()
        .ok_or_else(|| CliError::Usage("this command requires --out".into()))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// `scores`: computes the scores selected by --method and writes the score
/// JSON record.
pub fn cmd_scores(cfg: &RunConfig) -> Result<ScoreRecord, CliError> {
    let a = load_matrix(cfg)?;
    let scores_vec = match cfg.method {
        PlanMethod::Sensitivity => {
            if cfg.p == 2.0 {
                // the p = 2 sensitivities are the leverage scores by definition
                scores::leverage_scores(&a)?
            } else {
                scores::lp_sensitivities(&a, cfg.p, 1e-8)?
            }
        }
        PlanMethod::RootLeverage => scores::leverage_scores(&a)?,
        PlanMethod::Lewis => scores::lewis_weights(&a, cfg.p, 1e-8, 500)?,
        _ => {
            return Err(CliError::Usage(
                "scores supports --method sensitivity|rootlev|lewis".into(),
            ))
        }
    };
    let record = ScoreRecord::from(&scores_vec);
    write_json(require_out(cfg)?, &record)?;
    Ok(record)
}

/// `flatten`: applies the selected transform and writes the matrix CSV plus
/// the row-map JSON next to it.
pub fn cmd_flatten(cfg: &RunConfig) -> Result<(usize, usize), CliError> {
    let a = load_matrix(cfg)?;
    let (flat, map): (Matrix, RowMap) = match cfg.transform {
        TransformKind::Sensitivities => {
            let s = scores::lp_sensitivities(&a, cfg.p, 1e-8)?;
            flatten::flatten_sensitivities(&a, cfg.p, cfg.c, &s)?
        }
        TransformKind::Uniform => {
            let alpha = match cfg.alpha {
                AlphaChoice::Fixed(v) => v,
                AlphaChoice::Auto => {
                    return Err(CliError::Usage(
                        "uniform flatten requires --alpha in (0,1)".into(),
                    ))
                }
            };
            flatten::flatten_uniform(&a, cfg.p, alpha)?
        }
        TransformKind::SensLev => {
            let lev = scores::leverage_scores(&a)?;
            flatten::flatten_sens_lev(&a, cfg.p, cfg.c, &lev)?
        }
    };
    let out = require_out(cfg)?;
    matrix::write_matrix_csv(out, &flat)?;
    write_json(&sibling(out, "rowmap.json"), &map)?;
    Ok((a.rows(), flat.rows()))
}

fn build_plan(cfg: &RunConfig, a: &Matrix, alpha: f64) -> Result<SamplingPlan, CliError> {
    match cfg.method {
        PlanMethod::Sensitivity => {
            let s = if cfg.p == 2.0 {
                scores::leverage_scores(a)?
            } else {
                scores::lp_sensitivities(a, cfg.p, 1e-8)?
            };
            Ok(sampling::sensitivity_plan(&s, alpha)?)
        }
        PlanMethod::RootLeverage => {
            let lev = scores::leverage_scores(a)?;
            Ok(sampling::root_leverage_plan(&lev, cfg.p, alpha)?)
        }
        PlanMethod::Lewis => {
            let w = scores::lewis_weights(a, cfg.p, 1e-8, 500)?;
            let m_target = match cfg.m_target {
                Some(m) => m,
                None => {
                    // Lewis sampling row count: eps^-2 d^{1 v p/2} (log d)^2 log(d/eps)
                    let d = a.cols() as f64;
                    let ld = d.log2().max(1.0);
                    (d.powf((cfg.p / 2.0).max(1.0)) * ld * ld * (d / cfg.eps).log2().max(1.0)
                        / (cfg.eps * cfg.eps))
                        .ceil() as usize
                }
            };
            Ok(sampling::lewis_plan(&w, m_target)?)
        }
        PlanMethod::UniformHalf => Ok(sampling::half_plan_for(a.rows(), cfg.p)),
        PlanMethod::Custom => Err(CliError::Usage(
            "custom plans must be supplied programmatically".into(),
        )),
    }
}

/// `sample`: builds the plan (calibrating alpha when --alpha auto), draws,
/// and writes the draw JSON plus the sampled matrix CSV.
pub fn cmd_sample(cfg: &RunConfig) -> Result<SampleDraw, CliError> {
    let a = load_matrix(cfg)?;
    let seed = trial_seed(cfg.seed, 0);
    let draw = match (cfg.alpha, cfg.method) {
        (AlphaChoice::Auto, PlanMethod::UniformHalf) => {
            sampling::draw(&sampling::half_plan_for(a.rows(), cfg.p), seed)
        }
        (AlphaChoice::Auto, _) => {
            let (_, dr, _) = sampling::calibrate_alpha(&a, cfg.p, cfg.eps, cfg.method, seed, 60)?;
            dr
        }
        (AlphaChoice::Fixed(alpha), _) => {
            let plan = build_plan(cfg, &a, alpha)?;
            sampling::draw(&plan, seed)
        }
    };
    let out = require_out(cfg)?;
    write_json(out, &draw)?;
    let sampled = sampling::apply(&draw, &a)?;
    matrix::write_matrix_csv(&sibling(out, "sampled.csv"), &sampled)?;
    Ok(draw)
}

/// `verify`: draws (or calibrates) and reports the measured distortion;
/// passes when it is at most eps.
pub fn cmd_verify(cfg: &RunConfig) -> Result<(bool, DistortionReport), CliError> {
    let a = load_matrix(cfg)?;
    let seed = trial_seed(cfg.seed, 0);
    let (pass, report) = match cfg.alpha {
        AlphaChoice::Auto if cfg.method != PlanMethod::UniformHalf => {
            let (_, _, report) =
                sampling::calibrate_alpha(&a, cfg.p, cfg.eps, cfg.method, seed, 60)?;
            (report.lambda_est <= cfg.eps, report)
        }
        _ => {
            let plan = match cfg.alpha {
                AlphaChoice::Fixed(alpha) => build_plan(cfg, &a, alpha)?,
                AlphaChoice::Auto => sampling::half_plan_for(a.rows(), cfg.p),
            };
            let dr = sampling::draw(&plan, seed);
            verify::check_embedding(
                &a,
                &dr,
                cfg.p,
                cfg.eps,
                cfg.probes,
                cfg.restarts,
                trial_seed(cfg.seed, 1),
            )?
        }
    };
    if let Some(out) = &cfg.out {
        write_json(out, &report)?;
    }
    Ok((pass, report))
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// `bench`: sample-complexity scaling study over an eps grid. For each eps,
/// runs `trials` independent calibrations and draws, records kept-row
/// statistics, and fits the slope of log(median rows) on log(1/eps).
pub fn cmd_bench_scaling(cfg: &RunConfig) -> Result<ExperimentResult, CliError> {
    if cfg.eps_grid.is_empty() {
        return Err(CliError::Usage("bench requires --eps-grid".into()));
    }
    let a = load_matrix(cfg)?;
    // scores are a property of the matrix alone; compute them once and share
    // them across every trial and eps
    let scores_vec = sampling::plan_scores(&a, cfg.p, cfg.method)?;
    let total_sens = scores_vec.total();

    let mut runs = Vec::new();
    let mut wall_ms: Vec<Vec<u128>> = Vec::new();
    for (grid_idx, &eps) in cfg.eps_grid.iter().enumerate() {
        let mut trials = Vec::with_capacity(cfg.trials);
        let mut timings = Vec::with_capacity(cfg.trials);
        let mut budget_exhausted = false;
        for t in 0..cfg.trials {
            let seed = trial_seed(cfg.seed, grid_idx * cfg.trials + t);
            let started = std::time::Instant::now();
            match sampling::calibrate_alpha_with_scores(
                &a,
                &scores_vec,
                cfg.p,
                eps,
                cfg.method,
                seed,
                60,
            ) {
                Ok((alpha, dr, rep)) => {
                    trials.push(TrialRecord {
                        seed,
                        rows_kept: dr.kept.len(),
                        lambda_est: rep.lambda_est,
                        total_sens,
                        alpha,
                    });
                }
                Err(CoreError::BudgetExhausted { alpha, lambda }) => {
                    budget_exhausted = true;
                    trials.push(TrialRecord {
                        seed,
                        rows_kept: 0,
                        lambda_est: lambda,
                        total_sens,
                        alpha,
                    });
                }
                Err(e) => return Err(e.into()),
            }
            timings.push(started.elapsed().as_millis());
        }
        let mut rows: Vec<f64> = trials.iter().map(|t| t.rows_kept as f64).collect();
        rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut lambdas: Vec<f64> = trials.iter().map(|t| t.lambda_est).collect();
        lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        runs.push(EpsRun {
            eps,
            trials,
            median_rows: percentile(&rows, 0.5),
            p25_rows: percentile(&rows, 0.25),
            p75_rows: percentile(&rows, 0.75),
            median_lambda: percentile(&lambdas, 0.5),
            budget_exhausted,
        });
        wall_ms.push(timings);
    }

    // least-squares slope of log(median rows) on log(1/eps)
    let pts: Vec<(f64, f64)> = runs
        .iter()
        .filter(|r| !r.budget_exhausted && r.median_rows > 0.0)
        .map(|r| ((1.0 / r.eps).ln(), r.median_rows.ln()))
        .collect();
    let slope = if pts.len() >= 2 {
        let xm = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let ym = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let sxy: f64 = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - xm) * (p.0 - xm)).sum();
        if sxx > 0.0 {
            Some(sxy / sxx)
        } else {
            None
        }
    } else {
        None
    };

    let result = ExperimentResult {
        config: cfg.echo(),
        runs,
        slope,
    };
    if let Some(out) = &cfg.out {
        write_json(out, &result)?;
        write_plot_csv(&sibling(out, "plot.csv"), &result)?;
        // timings go to the sidecar so the primary outputs stay deterministic
        let meta = serde_json::json!({
            "unix_time": std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            "wall_ms": wall_ms,
        });
        write_json(&sibling(out, "meta.json"), &meta)?;
    }
    Ok(result)
}

fn write_plot_csv(path: &Path, result: &ExperimentResult) -> Result<(), CliError> {
    let mut text = String::from("eps,median_rows,p25_rows,p75_rows,median_lambda\n");
    for run in &result.runs {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            run.eps, run.median_rows, run.p25_rows, run.p75_rows, run.median_lambda
        ));
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert!((percentile(&v, 0.5) - 2.5).abs() < 1e-12);
        assert!((percentile(&v, 0.25) - 1.75).abs() < 1e-12);
        assert!((percentile(&v, 1.0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn trial_seeds_are_offset() {
        assert_eq!(trial_seed(10, 0), 11);
        assert_eq!(trial_seed(10, 3), 14);
    }
}
