//! Bidirectional continuation experiment across the transition.

use asbm::bath::{discretize_bath, CouplingCase, ModelSpec};
use asbm::solver::{solve_with_seeds, SolverConfig};

fn main() {
    let config = SolverConfig {
        multiplicity: 6,
        restarts: 16,
        seed: 11,
        energy_tolerance: 3e-8,
        max_sweeps: 50_000,
        ..Default::default()
    };
    let alphas = [0.028, 0.025, 0.023, 0.022, 0.021, 0.0205, 0.02];
    let mut warm = Vec::new();
    for &alpha in &alphas {
        let spec = ModelSpec::canonical(CouplingCase::Diagonal, 0.05, alpha);
        let bath = discretize_bath(&spec).unwrap();
        let t0 = std::time::Instant::now();
        match solve_with_seeds(&spec, &bath, &config, &warm) {
            Ok(r) => {
                println!(
                    "alpha {alpha:.4}: E {:+.10} parity {:+.4} |sz| {:.4} var {:.2e} partner {} winner {} conv {} [{:.0} s]",
                    r.energy,
                    r.observables.parity,
                    r.observables.sigma_z.abs(),
                    r.energy_variance,
                    r.degenerate_partner,
                    r.winner_restart,
                    r.converged_restarts,
                    t0.elapsed().as_secs_f64()
                );
                warm = vec![r.state.clone(), r.state.z2_reflected()];
            }
            Err(e) => println!("alpha {alpha:.4}: FAILED {e} [{:.0} s]", t0.elapsed().as_secs_f64()),
        }
    }
}
