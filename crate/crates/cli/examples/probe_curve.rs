// scratch: lambda(alpha) and rows(alpha) under C=1 flattening
use lpcoreset_core::flatten::flatten_sensitivities;
use lpcoreset_core::generators::gaussian_matrix;
use lpcoreset_core::sampling::*;
use lpcoreset_core::scores::lp_sensitivities;
use lpcoreset_core::verify::distortion_estimate;

fn main() {
    let c: f64 = std::env::args().nth(1).unwrap().parse().unwrap();
    let a = gaussian_matrix(2000, 5, 12).unwrap();
    let p = 3.0;
    let s0 = lp_sensitivities(&a, p, 1e-8).unwrap();
    let (flat, _) = flatten_sensitivities(&a, p, c, &s0).unwrap();
    let s = lp_sensitivities(&flat, p, 1e-8).unwrap();
    let max_sens = s.values.iter().fold(0.0f64, |m, v| m.max(*v));
    println!("C={c}: flat {}x{} total {:.3} max_sens {:.5}", flat.rows(), flat.cols(), s.total(), max_sens);
    let mut alpha = 0.16;
    for _ in 0..9 {
        let plan = sensitivity_plan(&s, alpha).unwrap();
        let mut lams: Vec<f64> = Vec::new();
        let mut rows = 0usize;
        for seed in 0..20u64 {
            let dr = draw(&plan, 17_000 + seed);
            rows += dr.kept.len();
            let rep = distortion_estimate(&flat, &dr, 128, 4, seed).unwrap();
            lams.push(rep.lambda_est);
        }
        lams.sort_by(|a, b| a.partial_cmp(b).unwrap());
        println!(
            "alpha {:.5}: E_rows {:.0} lambda p10 {:.4} median {:.4} p90 {:.4}",
            alpha, rows as f64 / 20.0, lams[2], lams[10], lams[17]
        );
        alpha /= 2.0;
    }
}
