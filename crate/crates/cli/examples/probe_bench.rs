// scratch probe for the scaling study (removed before final)
use lpcoreset_cli::commands::cmd_bench_scaling;
use lpcoreset_cli::config::{AlphaChoice, RunConfig, Source, TransformKind};
use lpcoreset_core::flatten::flatten_sensitivities;
use lpcoreset_core::generators::gaussian_matrix;
use lpcoreset_core::matrix::write_matrix_csv;
use lpcoreset_core::sampling::PlanMethod;
use lpcoreset_core::scores::lp_sensitivities;
use std::time::Instant;

fn main() {
    let t = Instant::now();
    let a = gaussian_matrix(2000, 5, 12).unwrap();
    let p = 3.0;
    let s = lp_sensitivities(&a, p, 1e-8).unwrap();
    let (flat, _) = flatten_sensitivities(&a, p, 1.0, &s).unwrap();
    let dir = std::env::temp_dir().join("lpc-probe");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("flat.csv");
    write_matrix_csv(&path, &flat).unwrap();
    println!("prepared flat {}x{} in {:?}", flat.rows(), flat.cols(), t.elapsed());

    let cfg = RunConfig {
        source: Source::Input(path),
        p,
        eps: 0.25,
        delta: 0.1,
        trials: 9,
        seed: 202,
        method: PlanMethod::Sensitivity,
        alpha: AlphaChoice::Auto,
        c: 4.0,
        transform: TransformKind::Sensitivities,
        m_target: None,
        eps_grid: vec![0.4, 0.3, 0.2, 0.15, 0.1],
        probes: 256,
        restarts: 8,
        out: None,
    };
    let result = cmd_bench_scaling(&cfg).unwrap();
    for run in &result.runs {
        println!(
            "eps {}: median_rows {} lambda {:.4} exhausted {}",
            run.eps, run.median_rows, run.median_lambda, run.budget_exhausted
        );
    }
    println!("slope: {:?} total {:?}", result.slope, t.elapsed());
}
