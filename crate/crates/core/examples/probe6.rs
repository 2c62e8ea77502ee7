//! Warm-bisection calibration across the diagonal transition.

use asbm::bath::{discretize_bath, CouplingCase, ModelSpec};
use asbm::solver::{solve_with_seeds, GroundStateRecord, SolverConfig};
use std::time::Instant;

fn solve_at(
    alpha: f64,
    config: &SolverConfig,
    warm: &[asbm::ansatz::VariationalState],
) -> Result<GroundStateRecord, asbm::solver::SolverError> {
    let spec = ModelSpec::canonical(CouplingCase::Diagonal, 0.05, alpha);
    let bath = discretize_bath(&spec).unwrap();
    solve_with_seeds(&spec, &bath, config, warm)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let tol: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(1e-6);
    let max_sweeps: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(30_000);
    let restarts: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(16);
    let config = SolverConfig {
        multiplicity: 6,
        restarts,
        seed: 5,
        energy_tolerance: tol,
        max_sweeps,
        ..Default::default()
    };

    let t0 = Instant::now();
    let lo_rec = solve_at(0.016, &config, &[]).expect("lo endpoint");
    println!(
        "lo 0.016: E {:+.9} parity {:+.3} |sz| {:.3} [{:.0} s]",
        lo_rec.energy,
        lo_rec.observables.parity,
        lo_rec.observables.sigma_z.abs(),
        t0.elapsed().as_secs_f64()
    );
    let t0 = Instant::now();
    let hi_rec = solve_at(0.028, &config, &[]).expect("hi endpoint");
    println!(
        "hi 0.028: E {:+.9} parity {:+.3} |sz| {:.3} [{:.0} s]",
        hi_rec.energy,
        hi_rec.observables.parity,
        hi_rec.observables.sigma_z.abs(),
        t0.elapsed().as_secs_f64()
    );

    let mut lo = (0.016, lo_rec);
    let mut hi = (0.028, hi_rec);
    let mut bisect_config = config.clone();
    bisect_config.restarts = 8;
    while hi.0 - lo.0 > 1e-4 {
        let mid = 0.5 * (lo.0 + hi.0);
        let warm = vec![
            lo.1.state.clone(),
            lo.1.state.z2_reflected(),
            hi.1.state.clone(),
            hi.1.state.z2_reflected(),
        ];
        let t0 = Instant::now();
        match solve_at(mid, &bisect_config, &warm) {
            Ok(rec) => {
                let localized = rec.observables.parity.abs() < 0.5;
                println!(
                    "mid {:.5}: E {:+.9} parity {:+.3} |sz| {:.3} -> {} [{:.0} s]",
                    mid,
                    rec.energy,
                    rec.observables.parity,
                    rec.observables.sigma_z.abs(),
                    if localized { "localized" } else { "delocalized" },
                    t0.elapsed().as_secs_f64()
                );
                if localized {
                    hi = (mid, rec);
                } else {
                    lo = (mid, rec);
                }
            }
            Err(e) => {
                println!("mid {mid:.5}: FAILED {e} [{:.0} s]", t0.elapsed().as_secs_f64());
                break;
            }
        }
    }
    println!("alpha_c bracket: [{:.5}, {:.5}] -> {:.5}", lo.0, hi.0, 0.5 * (lo.0 + hi.0));
}
