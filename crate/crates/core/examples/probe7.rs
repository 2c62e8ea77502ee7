//! Variance-peak calibration across the off-diagonal transition.

use asbm::analysis::{locate_transition, TransitionEstimator};
use asbm::bath::{CouplingCase, ModelSpec};
use asbm::solver::{continuation_scan, GroundStateRecord, SolverConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let tol: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(3e-8);
    let max_sweeps: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(60_000);
    let restarts: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(16);
    let case = match args.get(4).map(String::as_str) {
        Some("offdiag") => CouplingCase::OffDiagonal,
        _ => CouplingCase::Diagonal,
    };
    let base = ModelSpec::canonical(case, 0.05, 0.0);
    let alphas: Vec<f64> = (0..13).map(|i| 0.018 + 0.0005 * i as f64).collect();
    let config = SolverConfig {
        multiplicity: 6,
        restarts,
        seed: 77,
        energy_tolerance: tol,
        max_sweeps,
        ..Default::default()
    };
    let t0 = std::time::Instant::now();
    match continuation_scan(&base, &alphas, &config) {
        Ok(records) => {
            for (r, &a) in records.iter().zip(&alphas) {
                println!(
                    "alpha {a:.4}: E {:+.10} var {:.3e} parity {:+.3} |sz| {:.3} S {:.3}",
                    r.energy,
                    r.energy_variance,
                    r.observables.parity,
                    r.observables.sigma_z.abs(),
                    r.observables.entropy
                );
            }
            let refs: Vec<&GroundStateRecord> = records.iter().collect();
            for est in [
                TransitionEstimator::VariancePeak,
                TransitionEstimator::ParityJump,
                TransitionEstimator::EntropyCusp,
                TransitionEstimator::QfmaxPeak,
            ] {
                match locate_transition(&refs, est) {
                    Ok(fit) => println!(
                        "{}: alpha_c = {:.5} +- {:.5}",
                        est.as_str(),
                        fit.alpha_c,
                        fit.uncertainty
                    ),
                    Err(e) => println!("{}: {}", est.as_str(), e),
                }
            }
            println!("total {:.0} s", t0.elapsed().as_secs_f64());
        }
        Err(e) => println!("scan failed: {e} [{:.0} s]", t0.elapsed().as_secs_f64()),
    }
}
