//! Inline trace probe for near-critical diagonal runs.

use asbm::ansatz::{compute_kernels, energy, VariationalState};
use asbm::bath::{discretize_bath, CouplingCase, ModelSpec};
use asbm::solver::{iterate_once, relax, SolverConfig};
use asbm::Complex64 as C64;
use rand::{Rng, SeedableRng};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let alpha: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(0.019);
    let restart: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1);
    let sweeps_max: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(50_000);
    let spec = ModelSpec::canonical(CouplingCase::Diagonal, 0.05, alpha);
    let config = SolverConfig { multiplicity: 6, seed: 11, ..Default::default() };
    let bath = discretize_bath(&spec).unwrap();

    let n = config.multiplicity;
    let m = bath.num_modes();
    let mut rng = rand_pcg::Pcg64::seed_from_u64(asbm::derive_seed(config.seed, restart as u64));
    let mut state = VariationalState::zeros(n, m);
    if restart % 4 == 0 {
        // crude stand-in for a structured seed: localized up
        for comp in 0..n {
            state.weight_up[comp] = C64::new(1.0, 0.0);
            for k in 0..m {
                state.disp_up[comp * m + k] =
                    C64::new(-bath.half_sum[k] / bath.omega[k], 0.0)
                        + C64::new(rng.gen_range(-0.01..0.01), 0.0);
                state.disp_down[comp * m + k] = C64::new(rng.gen_range(-0.01..0.01), 0.0);
            }
        }
    } else {
        let scales: Vec<f64> = bath
            .omega
            .iter()
            .zip(&bath.eta)
            .map(|(&w, &e)| (e / (2.0 * w + spec.delta)).min(5.0))
            .collect();
        for comp in 0..n {
            state.weight_up[comp] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            state.weight_down[comp] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            for k in 0..m {
                state.disp_up[comp * m + k] = C64::new(
                    scales[k] * rng.gen_range(-1.0..1.0),
                    scales[k] * rng.gen_range(-1.0..1.0),
                );
                state.disp_down[comp * m + k] = C64::new(
                    scales[k] * rng.gen_range(-1.0..1.0),
                    scales[k] * rng.gen_range(-1.0..1.0),
                );
            }
        }
    }

    let mut stage = 0usize;
    let mut stalled = 0usize;
    let mut prev_spread = f64::INFINITY;
    let (mut wmin, mut wmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut drift = f64::INFINITY;
    for sweep in 0..sweeps_max {
        let kernels = compute_kernels(&state, &bath, &spec).unwrap();
        let eval = energy(&state, &kernels).unwrap();
        state.rescale_weights(1.0 / eval.norm.sqrt());
        wmin = wmin.min(eval.energy);
        wmax = wmax.max(eval.energy);
        if sweep > 0 && sweep % 100 == 0 {
            let spread = (wmax - wmin) / eval.energy.abs().max(1e-9);
            if sweep % 2000 == 0 {
                println!(
                    "sweep {sweep:6} stage {stage} E {:+.13} spread {spread:9.3e} drift {drift:9.3e}",
                    eval.energy
                );
            }
            if spread >= prev_spread * (1.0 - config.stage_tolerance) {
                stalled += 1;
            } else {
                stalled = 0;
            }
            if stalled >= 2 && stage + 1 < 10 {
                stage += 1;
                stalled = 0;
                prev_spread = f64::INFINITY;
                println!("    stage -> {stage} at sweep {sweep} (spread {spread:.3e})");
            } else {
                prev_spread = spread;
            }
            wmin = f64::INFINITY;
            wmax = f64::NEG_INFINITY;
        }
        let targets = iterate_once(&state, &kernels, &bath, eval.energy);
        let factor = config.relaxation_at_stage(stage);
        let (next, step) = relax(&state, &targets.state, factor);
        state = next;
        drift = step;
    }
}
