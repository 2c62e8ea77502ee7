//! Two-phase warm-start stability experiment.

use asbm::bath::{discretize_bath, CouplingCase, ModelSpec};
use asbm::solver::{solve_traced, SolverConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let alpha: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(0.05);
    let spec = ModelSpec::canonical(CouplingCase::Diagonal, 0.05, alpha);
    let bath = discretize_bath(&spec).unwrap();

    // Phase 1: loose solve to land in the basin.
    let config1 = SolverConfig {
        multiplicity: 6,
        restarts: 8,
        seed: 11,
        energy_tolerance: 1e-6,
        max_sweeps: 30_000,
        ..Default::default()
    };
    let (result, _) = solve_traced(&spec, &bath, &config1, &[], false);
    let record = match result {
        Ok(r) => r,
        Err(e) => {
            println!("phase 1 failed: {e}");
            return;
        }
    };
    println!("phase 1: E {:+.12} sweeps {} |sz| {:.4}", record.energy, record.sweeps,
        record.observables.sigma_z.abs());

    // Phase 2: warm start only, tight tolerance.
    let config2 = SolverConfig {
        multiplicity: 6,
        restarts: 1, // restart 0 is the free structured seed; warm start appended
        seed: 12,
        energy_tolerance: 3e-9,
        max_sweeps: 120_000,
        ..Default::default()
    };
    let t0 = std::time::Instant::now();
    let (result2, traces) = solve_traced(&spec, &bath, &config2, &[record.state.clone()], true);
    match result2 {
        Ok(r) => println!(
            "phase 2: E {:+.12} sweeps {} var {:.2e} |sz| {:.4} [{:.1} s]",
            r.energy, r.sweeps, r.energy_variance, r.observables.sigma_z.abs(),
            t0.elapsed().as_secs_f64()
        ),
        Err(e) => println!("phase 2 failed: {e} [{:.1} s]", t0.elapsed().as_secs_f64()),
    }
    for t in &traces {
        if t.restart == 1 {
            for p in t.points.iter().step_by(20) {
                println!(
                    "warm sweep {:6} stage {} E {:+.12} spread {:.2e} gain-ok drift {:.2e}",
                    p.sweep, p.stage, p.energy, p.spread, p.drift
                );
            }
        }
    }
}
