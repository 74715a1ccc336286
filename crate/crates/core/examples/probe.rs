// scratch probe (removed before final)
use std::time::Instant;
use lpcoreset_core::generators::*;
use lpcoreset_core::scores::*;
use lpcoreset_core::verify::*;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_default();
    match which.as_str() {
        "c6" => {
            let t = Instant::now();
            for k in [1usize, 2] {
                for q in [2usize, 3] {
                    for p in [3.0f64, 4.0] {
                        let base = gaussian_matrix(400, k, (k * 10 + q) as u64).unwrap();
                        let v = vandermonde_features(&base, q).unwrap();
                        let s = lp_sensitivities(&v, p, 1e-8).unwrap();
                        let bound = (p * q as f64 + 1.0).powi(k as i32);
                        println!("k={k} q={q} p={p}: S={:.3} bound={bound:.0} ok={}", s.total(), s.total() <= bound);
                    }
                }
            }
            let (sum, _) = low_rank_plus_sparse_parts(400, 6, 2, 1, 77).unwrap();
            let s = lp_sensitivities(&sum, 3.0, 1e-8).unwrap();
            let bound = 6.0f64.powi(1) * 3.0f64.powi(3);
            println!("lowrank+sparse: S={:.3} bound={bound} ok={}", s.total(), s.total() <= bound);
            println!("c6 time {:?}", t.elapsed());
        }
        "c5" => {
            let t = Instant::now();
            for p in [1.0f64, 1.5, 3.0, 4.0] {
                let g = gaussian_matrix(200, 4, 3).unwrap();
                let vb = gaussian_matrix(200, 1, 4).unwrap();
                let v = vandermonde_features(&vb, 2).unwrap();
                let (ls, _) = low_rank_plus_sparse_parts(200, 5, 2, 1, 5).unwrap();
                for (name, m) in [("gauss", &g), ("vander", &v), ("lrs", &ls)] {
                    match check_total_sens_bounds(m, p) {
                        Ok(ok) => println!("p={p} {name}: {}", ok),
                        Err(e) => println!("p={p} {name}: ERR {e}"),
                    }
                }
            }
            println!("c5 time {:?}", t.elapsed());
        }
        "c7" => {
            let t = Instant::now();
            let mut fails = 0;
            for trial in 0..30u64 {
                let p = 3.0;
                let a = match trial % 3 {
                    0 => gaussian_matrix(80, 5, trial).unwrap(),
                    1 => {
                        let b = gaussian_matrix(80, 1, trial).unwrap();
                        vandermonde_features(&b, 2).unwrap()
                    }
                    _ => low_rank_plus_sparse(80, 5, 2, 1, trial).unwrap(),
                };
                match check_perturbation_bound(&a, p, 1000 + trial) {
                    Ok(true) => {}
                    Ok(false) => { fails += 1; println!("trial {trial} FAIL"); }
                    Err(e) => { fails += 1; println!("trial {trial} ERR {e}"); }
                }
            }
            println!("c7: {fails} failures of 30, time {:?}", t.elapsed());
        }
        "c8" => {
            for p in [1.0, 1.5] {
                let t = Instant::now();
                let ok = check_gaussian_small_sens(4096, 4, p, 42, 10.0).unwrap();
                println!("c8 p={p}: ok={ok} time={:?}", t.elapsed());
            }
        }
        _ => eprintln!("unknown"),
    }
}
