//! Exact reference calculations in a truncated Fock space.
//!
//! For small baths (a few modes) the full Hamiltonian is assembled in the
//! product basis {up, down} x Fock and diagonalized: densely below
//! [`crate::linalg::DENSE_DIM_LIMIT`], by Lanczos above. The multi-polaron
//! ansatz can be expanded in the same basis, which gives brute-force values
//! for every overlap, energy, observable, and the energy variance that the
//! coherent-state algebra must reproduce.

use crate::ansatz::VariationalState;
use crate::bath::{DiscretizedBath, ModelSpec};
use crate::linalg::{lanczos_lowest, sym_eig_dense, SymMatrix, DENSE_DIM_LIMIT};
use num_complex::Complex64 as C64;
use std::ops::{AddAssign, Mul};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("Fock space too large: {dim} states exceeds {max}")]
    SpaceTooLarge { dim: usize, max: usize },
    #[error("cutoff must be at least 10, got {0}")]
    CutoffTooSmall(usize),
    #[error("ground energy not converged in cutoff: |dE| = {delta:.3e} at cutoff {cutoff}")]
    CutoffNotConverged { cutoff: usize, delta: f64 },
    #[error("bath has {bath} modes, oracle supports at most {max}")]
    TooManyModes { bath: usize, max: usize },
}

pub const MAX_ORACLE_MODES: usize = 4;
pub const MAX_SPACE_DIM: usize = 1_000_000;

/// Truncated-Fock-space configuration mirroring one model instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FockConfig {
    pub num_modes: usize,
    /// Maximum occupation per mode.
    pub cutoff: usize,
}

impl FockConfig {
    pub fn validate(&self) -> Result<(), OracleError> {
        if self.cutoff < 10 {
            return Err(OracleError::CutoffTooSmall(self.cutoff));
        }
        if self.num_modes > MAX_ORACLE_MODES {
            return Err(OracleError::TooManyModes { bath: self.num_modes, max: MAX_ORACLE_MODES });
        }
        let dim = 2usize.saturating_mul((self.cutoff + 1).saturating_pow(self.num_modes as u32));
        if dim > MAX_SPACE_DIM {
            return Err(OracleError::SpaceTooLarge { dim, max: MAX_SPACE_DIM });
        }
        Ok(())
    }
}

/// Index arithmetic for the product basis. Basis index = spin * half_dim +
/// sum_k n_k stride_k, spin 0 = up, 1 = down.
#[derive(Debug, Clone)]
pub struct FockSpace {
    pub num_modes: usize,
    pub cutoff: usize,
    pub half_dim: usize,
    pub dim: usize,
    strides: Vec<usize>,
    sqrt_table: Vec<f64>,
}

impl FockSpace {
    pub fn new(num_modes: usize, cutoff: usize) -> Self {
        let base = cutoff + 1;
        let mut strides = Vec::with_capacity(num_modes);
        let mut half_dim = 1usize;
        for _ in 0..num_modes {
            strides.push(half_dim);
            half_dim *= base;
        }
        let sqrt_table = (0..=base).map(|j| (j as f64).sqrt()).collect();
        FockSpace { num_modes, cutoff, half_dim, dim: 2 * half_dim, strides, sqrt_table }
    }

    #[inline]
    pub fn occupation(&self, bosonic_index: usize, mode: usize) -> usize {
        (bosonic_index / self.strides[mode]) % (self.cutoff + 1)
    }

    pub fn total_occupation(&self, bosonic_index: usize) -> usize {
        (0..self.num_modes).map(|k| self.occupation(bosonic_index, k)).sum()
    }
}

/// y = H x in the truncated basis; works for real and complex vectors.
pub fn apply_hamiltonian<T>(
    space: &FockSpace,
    bath: &DiscretizedBath,
    spec: &ModelSpec,
    x: &[T],
    y: &mut [T],
) where
    T: Copy + Default + AddAssign + Mul<f64, Output = T>,
{
    assert_eq!(x.len(), space.dim);
    assert_eq!(y.len(), space.dim);
    for v in y.iter_mut() {
        *v = T::default();
    }
    let half = space.half_dim;
    let half_delta = 0.5 * spec.delta;
    let half_eps = 0.5 * spec.epsilon;
    for i in 0..space.dim {
        let xi = x[i];
        let (spin_down, occ_index) = (i >= half, i % half);
        let sz = if spin_down { -1.0 } else { 1.0 };
        let flip_base = if spin_down { occ_index } else { occ_index + half };
        // sigma_y channel sign: H maps |up> -> -|down> and |down> -> +|up>.
        let flip_sign = if spin_down { 1.0 } else { -1.0 };

        let mut diag = sz * half_eps;
        for k in 0..space.num_modes {
            let occ = space.occupation(occ_index, k);
            diag += bath.omega[k] * occ as f64;
            let stride = self_stride(space, k);
            let c = bath.half_sum[k];
            let d = bath.half_diff[k];
            if occ < space.cutoff {
                let amp = space.sqrt_table[occ + 1];
                // sigma_z (b+ + b) and i sigma_y (b+ - b) raising parts.
                y[i + stride] += xi * (sz * c * amp);
                y[flip_base + stride] += xi * (flip_sign * d * amp);
            }
            if occ > 0 {
                let amp = space.sqrt_table[occ];
                y[i - stride] += xi * (sz * c * amp);
                y[flip_base - stride] += xi * (-flip_sign * d * amp);
            }
        }
        y[i] += xi * diag;
        y[flip_base] += xi * (-half_delta);
    }
}

#[inline]
fn self_stride(space: &FockSpace, mode: usize) -> usize {
    space.strides[mode]
}

/// Dense Hamiltonian matrix; intended for small spaces only.
pub fn dense_hamiltonian(space: &FockSpace, bath: &DiscretizedBath, spec: &ModelSpec) -> SymMatrix {
    let mut h = SymMatrix::zeros(space.dim);
    let mut unit = vec![0.0f64; space.dim];
    let mut column = vec![0.0f64; space.dim];
    for j in 0..space.dim {
        unit[j] = 1.0;
        apply_hamiltonian(space, bath, spec, &unit, &mut column);
        unit[j] = 0.0;
        for i in 0..space.dim {
            h.set(i, j, column[i]);
        }
    }
    h
}

#[derive(Debug, Clone)]
pub struct EdSolution {
    pub energy: f64,
    /// Real ground vector in the basis of `space`.
    pub vector: Vec<f64>,
    pub space: FockSpace,
    pub cutoff: usize,
}

/// Lowest eigenpair at a fixed cutoff.
fn ground_state_at_cutoff(
    spec: &ModelSpec,
    bath: &DiscretizedBath,
    cutoff: usize,
) -> (f64, Vec<f64>, FockSpace) {
    let space = FockSpace::new(bath.num_modes(), cutoff);
    if space.dim <= DENSE_DIM_LIMIT {
        let h = dense_hamiltonian(&space, bath, spec);
        let (evals, evecs) = sym_eig_dense(h);
        let vector = (0..space.dim).map(|k| evecs.get(k, 0)).collect();
        (evals[0], vector, space)
    } else {
        let (energy, vector) =
            lanczos_lowest(space.dim, |x, y| apply_hamiltonian(&space, bath, spec, x, y), 1e-12, 17);
        (energy, vector, space)
    }
}

/// Exact ground state with the occupation cutoff verified by doubling until
/// the energy moves by less than 1e-10.
pub fn ed_ground_state(
    spec: &ModelSpec,
    bath: &DiscretizedBath,
    fock: FockConfig,
) -> Result<EdSolution, OracleError> {
    fock.validate()?;
    if bath.num_modes() != fock.num_modes {
        return Err(OracleError::TooManyModes { bath: bath.num_modes(), max: fock.num_modes });
    }
    let mut cutoff = fock.cutoff;
    let mut current = ground_state_at_cutoff(spec, bath, cutoff);
    loop {
        let next_cutoff = cutoff * 2;
        let next_dim = 2 * (next_cutoff + 1).pow(fock.num_modes as u32);
        if next_dim > MAX_SPACE_DIM {
            return Err(OracleError::CutoffNotConverged { cutoff, delta: f64::NAN });
        }
        let next = ground_state_at_cutoff(spec, bath, next_cutoff);
        let delta = (next.0 - current.0).abs();
        current = next;
        cutoff = next_cutoff;
        if delta < 1e-10 {
            let (energy, vector, space) = current;
            return Ok(EdSolution { energy, vector, space, cutoff });
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExpandedState {
    pub vector: Vec<C64>,
    /// Largest per-component probability mass lost to the occupation cutoff.
    pub truncation_weight: f64,
}

/// Expand the multi-polaron ansatz in the truncated Fock basis using the
/// coherent-state amplitudes exp(-|f|^2/2) f^n / sqrt(n!).
pub fn expand_coherent_state(state: &VariationalState, space: &FockSpace) -> ExpandedState {
    assert_eq!(state.num_modes, space.num_modes);
    let base = space.cutoff + 1;
    let mut vector = vec![C64::new(0.0, 0.0); space.dim];
    let mut truncation: f64 = 0.0;

    let mut amps = vec![C64::new(0.0, 0.0); space.num_modes * base];
    for component in 0..state.num_components {
        for (branch, weight) in [(0usize, state.weight_up[component]), (1, state.weight_down[component])]
        {
            if weight.norm_sqr() == 0.0 {
                continue;
            }
            let disp = if branch == 0 {
                state.disp_up_row(component)
            } else {
                state.disp_down_row(component)
            };
            let mut kept = 1.0f64;
            for k in 0..space.num_modes {
                let f = disp[k];
                let gauss = (-0.5 * f.norm_sqr()).exp();
                let mut amp = C64::new(gauss, 0.0);
                let mut mode_mass = 0.0;
                for j in 0..base {
                    amps[k * base + j] = amp;
                    mode_mass += amp.norm_sqr();
                    amp = amp * f / space.sqrt_table[j + 1];
                }
                kept *= mode_mass;
            }
            truncation = truncation.max(1.0 - kept);
            let offset = branch * space.half_dim;
            for occ_index in 0..space.half_dim {
                let mut amp = weight;
                for k in 0..space.num_modes {
                    amp *= amps[k * base + space.occupation(occ_index, k)];
                }
                vector[offset + occ_index] += amp;
            }
        }
    }
    ExpandedState { vector, truncation_weight: truncation }
}

/// Observables evaluated directly on a Fock vector.
#[derive(Debug, Clone)]
pub struct FockObservables {
    pub norm_sqr: f64,
    pub energy: f64,
    pub h_second_moment: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub sigma_z: f64,
    pub entropy: f64,
    pub n_ex: f64,
    pub parity: f64,
    pub x_mean: Vec<f64>,
    pub p_mean: Vec<f64>,
    pub var_x: Vec<f64>,
    pub var_p: Vec<f64>,
    pub qf: Vec<f64>,
}

pub fn fock_observables(
    vector: &[C64],
    space: &FockSpace,
    bath: &DiscretizedBath,
    spec: &ModelSpec,
) -> FockObservables {
    let half = space.half_dim;
    let norm_sqr: f64 = vector.iter().map(|v| v.norm_sqr()).sum();

    let mut h_psi = vec![C64::new(0.0, 0.0); space.dim];
    apply_hamiltonian(space, bath, spec, vector, &mut h_psi);
    let energy: f64 =
        vector.iter().zip(&h_psi).map(|(v, h)| (v.conj() * h).re).sum::<f64>() / norm_sqr;
    let h2: f64 = h_psi.iter().map(|h| h.norm_sqr()).sum::<f64>() / norm_sqr;

    // Reduced spin density matrix.
    let mut rho_uu = 0.0;
    let mut rho_dd = 0.0;
    let mut z = C64::new(0.0, 0.0); // sum conj(psi_up) psi_down
    let mut parity = 0.0;
    let mut occupation = 0.0;
    for occ_index in 0..half {
        let up = vector[occ_index];
        let down = vector[half + occ_index];
        rho_uu += up.norm_sqr();
        rho_dd += down.norm_sqr();
        z += up.conj() * down;
        let total_occ = space.total_occupation(occ_index);
        let sign = if total_occ % 2 == 0 { 1.0 } else { -1.0 };
        parity += sign * 2.0 * (up.conj() * down).re;
        occupation += total_occ as f64 * (up.norm_sqr() + down.norm_sqr());
    }
    let sigma_x = 2.0 * z.re / norm_sqr;
    let sigma_y = 2.0 * z.im / norm_sqr;
    let sigma_z = (rho_uu - rho_dd) / norm_sqr;
    parity /= norm_sqr;
    let n_ex = occupation / norm_sqr + 0.5 * (1.0 - sigma_x);

    // Entropy of the 2x2 reduced density matrix.
    let p_uu = rho_uu / norm_sqr;
    let p_dd = rho_dd / norm_sqr;
    let off = (z / norm_sqr).norm_sqr();
    let gap = ((p_uu - p_dd).powi(2) + 4.0 * off).sqrt();
    let entropy = [(0.5 * (1.0 + gap)), (0.5 * (1.0 - gap))]
        .iter()
        .map(|&p| if p > 1e-300 { -p * p.log2() } else { 0.0 })
        .sum();

    let mut x_mean = Vec::with_capacity(space.num_modes);
    let mut p_mean = Vec::with_capacity(space.num_modes);
    let mut var_x = Vec::with_capacity(space.num_modes);
    let mut var_p = Vec::with_capacity(space.num_modes);
    let mut qf = Vec::with_capacity(space.num_modes);
    for k in 0..space.num_modes {
        let stride = space.strides[k];
        let mut b_mean = C64::new(0.0, 0.0);
        let mut b_sq = C64::new(0.0, 0.0);
        let mut occupancy = 0.0;
        for i in 0..space.dim {
            let occ = space.occupation(i % half, k);
            let amp = vector[i];
            occupancy += occ as f64 * amp.norm_sqr();
            if occ >= 1 {
                b_mean += vector[i - stride].conj() * amp * space.sqrt_table[occ];
            }
            if occ >= 2 {
                b_sq += vector[i - 2 * stride].conj()
                    * amp
                    * (space.sqrt_table[occ] * space.sqrt_table[occ - 1]);
            }
        }
        b_mean /= norm_sqr;
        b_sq /= norm_sqr;
        occupancy /= norm_sqr;
        let x = std::f64::consts::SQRT_2 * b_mean.re;
        let p = std::f64::consts::SQRT_2 * b_mean.im;
        let x2 = 0.5 * (2.0 * b_sq.re + 2.0 * occupancy + 1.0);
        let p2 = 0.5 * (1.0 + 2.0 * occupancy - 2.0 * b_sq.re);
        let vx = x2 - x * x;
        let vp = p2 - p * p;
        x_mean.push(x);
        p_mean.push(p);
        var_x.push(vx);
        var_p.push(vp);
        qf.push(vx * vp - 0.25);
    }

    FockObservables {
        norm_sqr,
        energy,
        h_second_moment: h2,
        sigma_x,
        sigma_y,
        sigma_z,
        entropy,
        n_ex,
        parity,
        x_mean,
        p_mean,
        var_x,
        var_p,
        qf,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{compute_kernels, energy, hamiltonian_second_moment};
    use crate::bath::{discretize_bath, CouplingCase};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_pcg::Pcg64;

    fn small_spec(case: CouplingCase, modes: usize, delta: f64, alpha: f64) -> ModelSpec {
        ModelSpec {
            s: 0.3,
            alpha,
            delta,
            epsilon: 0.0,
            omega_c: 1.0,
            lambda_grid: 2.0,
            num_modes: modes,
            coupling: case,
        }
    }

    fn random_state(n: usize, m: usize, scale: f64, seed: u64) -> VariationalState {
        let mut rng = Pcg64::seed_from_u64(seed);
        let mut c = |s: f64| C64::new(rng.gen_range(-s..s), rng.gen_range(-s..s));
        let mut state = VariationalState::zeros(n, m);
        for i in 0..n {
            state.weight_up[i] = c(1.0);
            state.weight_down[i] = c(1.0);
        }
        for i in 0..n * m {
            state.disp_up[i] = c(scale);
            state.disp_down[i] = c(scale);
        }
        state
    }

    #[test]
    fn hamiltonian_is_symmetric_in_fock_basis() {
        for case in [
            CouplingCase::Diagonal,
            CouplingCase::OffDiagonal,
            CouplingCase::RotatingWave,
            CouplingCase::CounterRotatingWave,
        ] {
            let spec = small_spec(case, 2, 0.07, 0.06);
            let bath = discretize_bath(&spec).unwrap();
            let space = FockSpace::new(2, 3);
            let h = dense_hamiltonian(&space, &bath, &spec);
            for i in 0..space.dim {
                for j in 0..space.dim {
                    assert!(
                        (h.get(i, j) - h.get(j, i)).abs() < 1e-14,
                        "{case:?} asymmetric at ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn vacuum_expansion_is_unit_vector() {
        let space = FockSpace::new(2, 10);
        let mut state = VariationalState::zeros(1, 2);
        state.weight_up[0] = C64::new(1.0, 0.0);
        let expanded = expand_coherent_state(&state, &space);
        assert!((expanded.vector[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
        let norm: f64 = expanded.vector.iter().map(|v| v.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-14);
        assert!(expanded.truncation_weight < 1e-15);
    }

    #[test]
    fn unit_displacement_coherent_state_is_normalized() {
        let space = FockSpace::new(1, 40);
        let mut state = VariationalState::zeros(1, 1);
        state.weight_up[0] = C64::new(1.0, 0.0);
        state.disp_up[0] = C64::new(1.0, 0.0);
        let expanded = expand_coherent_state(&state, &space);
        let norm: f64 = expanded.vector.iter().map(|v| v.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(expanded.truncation_weight < 1e-12);
    }

    #[test]
    fn expansion_norm_matches_kernel_norm() {
        let spec = small_spec(CouplingCase::Diagonal, 2, 0.05, 0.04);
        let bath = discretize_bath(&spec).unwrap();
        let space = FockSpace::new(2, 40);
        for seed in 0..10 {
            let state = random_state(2, 2, 1.2, 100 + seed);
            let expanded = expand_coherent_state(&state, &space);
            let fock_norm: f64 = expanded.vector.iter().map(|v| v.norm_sqr()).sum();
            let kernels = compute_kernels(&state, &bath, &spec).unwrap();
            let eval = energy(&state, &kernels).unwrap();
            assert!(
                (fock_norm - eval.norm).abs() < 1e-10 * eval.norm.max(1.0),
                "seed {seed}: {fock_norm} vs {}",
                eval.norm
            );
        }
    }

    #[test]
    fn expansion_energy_and_second_moment_match_kernels() {
        for case in [CouplingCase::Diagonal, CouplingCase::RotatingWave, CouplingCase::OffDiagonal]
        {
            let spec = small_spec(case, 2, 0.05, 0.06);
            let bath = discretize_bath(&spec).unwrap();
            let space = FockSpace::new(2, 40);
            for seed in 0..6 {
                let state = random_state(2, 2, 1.1, 300 + seed);
                let expanded = expand_coherent_state(&state, &space);
                let obs = fock_observables(&expanded.vector, &space, &bath, &spec);
                let kernels = compute_kernels(&state, &bath, &spec).unwrap();
                let eval = energy(&state, &kernels).unwrap();
                assert!(
                    (obs.energy - eval.energy).abs() < 1e-8 * eval.energy.abs().max(1.0),
                    "{case:?} energy {} vs {}",
                    obs.energy,
                    eval.energy
                );
                let h2 =
                    hamiltonian_second_moment(&state, &kernels, &bath, &spec).re / eval.norm;
                assert!(
                    (obs.h_second_moment - h2).abs() < 1e-8 * h2.abs().max(1.0),
                    "{case:?} H^2 {} vs {}",
                    obs.h_second_moment,
                    h2
                );
            }
        }
    }

    #[test]
    fn decoupled_spin_ground_energy() {
        let spec = small_spec(CouplingCase::Diagonal, 1, 0.1, 0.0);
        let bath = discretize_bath(&spec).unwrap();
        let sol = ed_ground_state(&spec, &bath, FockConfig { num_modes: 1, cutoff: 10 }).unwrap();
        assert!((sol.energy + 0.05).abs() < 1e-12);
    }

    #[test]
    fn displaced_oscillator_ground_energy() {
        // Diagonal coupling at zero tunneling, one mode: E0 = -eta^2/(4 w).
        let spec = small_spec(CouplingCase::Diagonal, 1, 0.0, 0.08);
        let bath = discretize_bath(&spec).unwrap();
        let expected = -bath.eta[0].powi(2) / (4.0 * bath.omega[0]);
        let sol = ed_ground_state(&spec, &bath, FockConfig { num_modes: 1, cutoff: 10 }).unwrap();
        assert!((sol.energy - expected).abs() < 1e-12, "{} vs {expected}", sol.energy);
    }

    #[test]
    fn parity_commutes_with_hamiltonian_at_zero_bias() {
        for case in [
            CouplingCase::Diagonal,
            CouplingCase::OffDiagonal,
            CouplingCase::RotatingWave,
            CouplingCase::CounterRotatingWave,
        ] {
            let spec = small_spec(case, 2, 0.07, 0.05);
            let bath = discretize_bath(&spec).unwrap();
            let space = FockSpace::new(2, 3);
            let h = dense_hamiltonian(&space, &bath, &spec);
            // Parity = sigma_x (x) (-1)^(sum n).
            let mut pi = SymMatrix::zeros(space.dim);
            for occ in 0..space.half_dim {
                let sign = if space.total_occupation(occ) % 2 == 0 { 1.0 } else { -1.0 };
                pi.set(occ, space.half_dim + occ, sign);
                pi.set(space.half_dim + occ, occ, sign);
            }
            let mut max_comm: f64 = 0.0;
            let mut h_norm: f64 = 0.0;
            for i in 0..space.dim {
                for j in 0..space.dim {
                    let hp: f64 =
                        (0..space.dim).map(|k| h.get(i, k) * pi.get(k, j)).sum();
                    let ph: f64 =
                        (0..space.dim).map(|k| pi.get(i, k) * h.get(k, j)).sum();
                    max_comm = max_comm.max((hp - ph).abs());
                    h_norm = h_norm.max(h.get(i, j).abs());
                }
            }
            assert!(max_comm < 1e-12 * h_norm.max(1.0), "{case:?}: commutator {max_comm}");
        }
    }

    #[test]
    fn excitation_number_commutes_for_rotating_wave() {
        let spec = small_spec(CouplingCase::RotatingWave, 2, 0.07, 0.05);
        let bath = discretize_bath(&spec).unwrap();
        let space = FockSpace::new(2, 3);
        let h = dense_hamiltonian(&space, &bath, &spec);
        // N_ex = sum n + (1 - sigma_x)/2.
        let mut nex = SymMatrix::zeros(space.dim);
        for occ in 0..space.half_dim {
            let n = space.total_occupation(occ) as f64;
            nex.set(occ, occ, n + 0.5);
            nex.set(space.half_dim + occ, space.half_dim + occ, n + 0.5);
            nex.set(occ, space.half_dim + occ, -0.5);
            nex.set(space.half_dim + occ, occ, -0.5);
        }
        let mut max_comm: f64 = 0.0;
        for i in 0..space.dim {
            for j in 0..space.dim {
                let hn: f64 = (0..space.dim).map(|k| h.get(i, k) * nex.get(k, j)).sum();
                let nh: f64 = (0..space.dim).map(|k| nex.get(i, k) * h.get(k, j)).sum();
                max_comm = max_comm.max((hn - nh).abs());
            }
        }
        assert!(max_comm < 1e-12, "commutator {max_comm}");
        // The counter-rotating case breaks the U(1) symmetry.
        let spec_crw = small_spec(CouplingCase::CounterRotatingWave, 2, 0.07, 0.05);
        let bath_crw = discretize_bath(&spec_crw).unwrap();
        let h_crw = dense_hamiltonian(&space, &bath_crw, &spec_crw);
        let mut broken: f64 = 0.0;
        for i in 0..space.dim {
            for j in 0..space.dim {
                let hn: f64 = (0..space.dim).map(|k| h_crw.get(i, k) * nex.get(k, j)).sum();
                let nh: f64 = (0..space.dim).map(|k| nex.get(i, k) * h_crw.get(k, j)).sum();
                broken = broken.max((hn - nh).abs());
            }
        }
        assert!(broken > 1e-3);
    }

    #[test]
    fn parity_exponential_form_matches_spin_flip_form() {
        // exp(i pi N_ex) acts as sigma_x (x) (-1)^(sum n); verified through
        // the eigendecomposition of N_ex on random vectors.
        let space = FockSpace::new(2, 3);
        let dim = space.dim;
        let mut nex = SymMatrix::zeros(dim);
        for occ in 0..space.half_dim {
            let n = space.total_occupation(occ) as f64;
            nex.set(occ, occ, n + 0.5);
            nex.set(space.half_dim + occ, space.half_dim + occ, n + 0.5);
            nex.set(occ, space.half_dim + occ, -0.5);
            nex.set(space.half_dim + occ, occ, -0.5);
        }
        let (evals, evecs) = sym_eig_dense(nex);
        let mut rng = Pcg64::seed_from_u64(404);
        for _ in 0..20 {
            let psi: Vec<C64> = (0..dim)
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            // <exp(i pi N_ex)> via the spectral decomposition.
            let mut via_exp = C64::new(0.0, 0.0);
            for j in 0..dim {
                let proj: C64 = (0..dim).map(|k| C64::from(evecs.get(k, j)) * psi[k]).sum();
                let phase = C64::new(0.0, std::f64::consts::PI * evals[j]).exp();
                via_exp += phase * proj.norm_sqr();
            }
            // <sigma_x (-1)^(sum n)> directly.
            let mut via_flip = C64::new(0.0, 0.0);
            for occ in 0..space.half_dim {
                let sign = if space.total_occupation(occ) % 2 == 0 { 1.0 } else { -1.0 };
                via_flip += psi[occ].conj() * psi[space.half_dim + occ] * sign;
                via_flip += psi[space.half_dim + occ].conj() * psi[occ] * sign;
            }
            assert!((via_exp - via_flip).norm() < 1e-10);
        }
    }

    #[test]
    fn cutoff_growth_stops_at_space_limit() {
        let spec = small_spec(CouplingCase::Diagonal, 4, 0.05, 5.0);
        let bath = discretize_bath(&spec).unwrap();
        // Four modes with strong coupling cannot converge within the space
        // budget starting from a large cutoff.
        let result = ed_ground_state(&spec, &bath, FockConfig { num_modes: 4, cutoff: 16 });
        assert!(matches!(result, Err(OracleError::CutoffNotConverged { .. })));
    }

    #[test]
    fn config_validation() {
        assert!(FockConfig { num_modes: 2, cutoff: 9 }.validate().is_err());
        assert!(FockConfig { num_modes: 5, cutoff: 12 }.validate().is_err());
        assert!(FockConfig { num_modes: 3, cutoff: 100 }.validate().is_err());
        assert!(FockConfig { num_modes: 2, cutoff: 40 }.validate().is_ok());
    }
}
