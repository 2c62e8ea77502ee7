//! Per-restart trace dump at canonical scale.

use asbm::bath::{discretize_bath, CouplingCase, ModelSpec};
use asbm::solver::{solve_traced, SolverConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let alpha: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(0.05);
    let tol: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(3e-8);
    let restarts: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(8);
    let max_sweeps: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(60_000);
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
    let (result, traces) = solve_traced(&spec, &bath, &config, &[], true);
    match result {
        Ok(r) => {
            println!(
                "winner {} E {:+.10} var {:.2e} |sz| {:.4} parity {:+.4}",
                r.winner_restart, r.energy, r.energy_variance,
                r.observables.sigma_z.abs(), r.observables.parity
            );
            for t in &traces {
                if let Some(p) = t.points.last() {
                    println!(
                        "r{:02} conv {:5} end sweep {:6} stage {} E {:+.10} spread {:.2e} drift {:.2e}",
                        t.restart, t.converged, p.sweep, p.stage, p.energy, p.spread, p.drift
                    );
                } else {
                    println!("r{:02} conv {:5} (no window reached)", t.restart, t.converged);
                }
            }
        }
        Err(e) => {
            println!("FAILED: {e}");
            for t in &traces {
                if let Some(p) = t.points.last() {
                    println!(
                        "r{:02} conv {:5} end sweep {:6} stage {} E {:+.10} spread {:.2e} drift {:.2e}",
                        t.restart, t.converged, p.sweep, p.stage, p.energy, p.spread, p.drift
                    );
                }
            }
            if let Ok(which) = std::env::var("PROBE_DUMP") {
                let which: usize = which.parse().unwrap();
                for t in &traces {
                    if t.restart == which {
                        for p in t.points.iter().step_by(15) {
                            println!(
                                "dump sweep {:6} stage {} E {:+.12} spread {:.2e} drift {:.2e}",
                                p.sweep, p.stage, p.energy, p.spread, p.drift
                            );
                        }
                    }
                }
            }
        }
    }
}
