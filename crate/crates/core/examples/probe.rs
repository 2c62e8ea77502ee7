//! Canonical-scale calibration probe; development aid.

use asbm::bath::{discretize_bath, CouplingCase, ModelSpec};
use asbm::solver::{solve, SolverConfig};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(String::as_str).unwrap_or("rw");

    match which {
        "rw" => {
            // Free phase at canonical scale.
            let spec = ModelSpec::canonical(CouplingCase::RotatingWave, 0.1, 0.01);
            let config = SolverConfig {
                multiplicity: 4,
                restarts: 4,
                seed: 7,
                energy_tolerance: 1e-12,
                ..Default::default()
            };
            let bath = discretize_bath(&spec).unwrap();
            let start = Instant::now();
            match solve(&spec, &bath, &config) {
                Ok(r) => println!(
                    "rw free: E {:+.12} (target -0.05) N_ex {:.3e} maxdisp {:.3e} sweeps {} conv {}/{} [{:.1} s]",
                    r.energy,
                    r.observables.n_ex,
                    r.observables.f_bar.iter().chain(&r.observables.g_bar).fold(0.0f64, |a, b| a.max(b.abs())),
                    r.sweeps,
                    r.converged_restarts,
                    config.restarts,
                    start.elapsed().as_secs_f64()
                ),
                Err(e) => println!("rw free FAILED: {e} [{:.1} s]", start.elapsed().as_secs_f64()),
            }
        }
        "diag" => {
            let alpha: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.019);
            let tol: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(1e-9);
            let restarts: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(8);
            let max_sweeps: usize = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(60_000);
            let spec = ModelSpec::canonical(CouplingCase::Diagonal, 0.05, alpha);
            let config = SolverConfig {
                multiplicity: 6,
                restarts,
                seed: 11,
                energy_tolerance: tol,
                max_sweeps,
                ..Default::default()
            };
            let bath = discretize_bath(&spec).unwrap();
            let start = Instant::now();
            match solve(&spec, &bath, &config) {
                Ok(r) => println!(
                    "diag a={alpha}: E {:+.10} parity {:+.4} |sz| {:.4} S {:.4} N_ex {:.3e} var {:.2e} partner {} sweeps {} conv {}/{} [{:.1} s]",
                    r.energy,
                    r.observables.parity,
                    r.observables.sigma_z.abs(),
                    r.observables.entropy,
                    r.observables.n_ex,
                    r.energy_variance,
                    r.degenerate_partner,
                    r.sweeps,
                    r.converged_restarts,
                    restarts,
                    start.elapsed().as_secs_f64()
                ),
                Err(e) => println!("diag a={alpha} FAILED: {e} [{:.1} s]", start.elapsed().as_secs_f64()),
            }
        }
        other => eprintln!("unknown probe {other}"),
    }
}
