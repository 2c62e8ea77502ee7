//! Multi-polaron coherent-state trial wavefunction and its matrix elements.
//!
//! The trial state superposes N multimode coherent states per spin branch:
//! spin-up components carry weights A_n and displacements f_{n,k}, spin-down
//! components carry B_n and g_{n,k}; every parameter is complex. All
//! Hamiltonian and overlap matrix elements reduce to Debye-Waller factors
//! (pairwise coherent-state overlaps) times low-order polynomials in the
//! displacements, which is what this module evaluates.
//!
//! Overlap exponents are accumulated in log space and exponentiated once per
//! pair, so deep-displacement states (sum |f|^2 of order 10^3 at M = 430)
//! underflow gracefully to zero instead of producing NaNs.

use crate::bath::{DiscretizedBath, ModelSpec};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AnsatzError {
    #[error("state has {state_modes} modes but bath has {bath_modes}")]
    DimensionMismatch { state_modes: usize, bath_modes: usize },
    #[error("degenerate state: norm = {norm:.3e} below 1e-14")]
    DegenerateNorm { norm: f64 },
}

/// Trial wavefunction parameters; `weight_*` have length N and `disp_*` are
/// row-major N x M.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalState {
    pub num_components: usize,
    pub num_modes: usize,
    pub weight_up: Vec<C64>,
    pub weight_down: Vec<C64>,
    pub disp_up: Vec<C64>,
    pub disp_down: Vec<C64>,
}

impl VariationalState {
    pub fn zeros(num_components: usize, num_modes: usize) -> Self {
        VariationalState {
            num_components,
            num_modes,
            weight_up: vec![C64::new(0.0, 0.0); num_components],
            weight_down: vec![C64::new(0.0, 0.0); num_components],
            disp_up: vec![C64::new(0.0, 0.0); num_components * num_modes],
            disp_down: vec![C64::new(0.0, 0.0); num_components * num_modes],
        }
    }

    /// Bare spin-x eigenstate times the bath vacuum, on the first component.
    pub fn free_state(num_components: usize, num_modes: usize) -> Self {
        let mut state = Self::zeros(num_components, num_modes);
        let w = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        state.weight_up[0] = w;
        state.weight_down[0] = w;
        state
    }

    #[inline]
    pub fn disp_up_row(&self, n: usize) -> &[C64] {
        &self.disp_up[n * self.num_modes..(n + 1) * self.num_modes]
    }

    #[inline]
    pub fn disp_down_row(&self, n: usize) -> &[C64] {
        &self.disp_down[n * self.num_modes..(n + 1) * self.num_modes]
    }

    pub fn is_finite(&self) -> bool {
        self.weight_up.iter().chain(&self.weight_down).all(|w| w.re.is_finite() && w.im.is_finite())
            && self.disp_up.iter().chain(&self.disp_down).all(|d| d.re.is_finite() && d.im.is_finite())
    }

    /// Scale both weight branches; displacements are untouched. Used to keep
    /// the norm at one without altering the physical state.
    pub fn rescale_weights(&mut self, factor: f64) {
        for w in self.weight_up.iter_mut().chain(self.weight_down.iter_mut()) {
            *w *= factor;
        }
    }

    /// Image of the state under the parity reflection (spin flip combined
    /// with displacement negation): A <-> B, f <-> -g.
    pub fn z2_reflected(&self) -> Self {
        let mut out = self.clone();
        out.weight_up = self.weight_down.clone();
        out.weight_down = self.weight_up.clone();
        out.disp_up = self.disp_down.iter().map(|d| -d).collect();
        out.disp_down = self.disp_up.iter().map(|d| -d).collect();
        out
    }

    /// Sign flip of the spin-down branch, the partner transformation of
    /// tunneling sign inversion.
    pub fn down_branch_negated(&self) -> Self {
        let mut out = self.clone();
        for b in out.weight_down.iter_mut() {
            *b = -*b;
        }
        out
    }
}

/// Pairwise Debye-Waller factors, displacement contractions, and per-pair
/// Hamiltonian kernels for one state. Index convention: entry (m, n) stored
/// at m*N + n couples bra component m to ket component n.
#[derive(Debug, Clone)]
pub struct OverlapKernels {
    pub n: usize,
    /// <f_m|f_n>, <g_m|g_n>, <f_m|g_n>, <g_m|f_n>.
    pub ovl_uu: Vec<C64>,
    pub ovl_dd: Vec<C64>,
    pub ovl_ud: Vec<C64>,
    pub ovl_du: Vec<C64>,
    /// Per-pair Hamiltonian kernels (matrix element divided by the overlap).
    pub h_uu: Vec<C64>,
    pub h_dd: Vec<C64>,
    pub h_ud: Vec<C64>,
    pub h_du: Vec<C64>,
    /// Raw displacement dots sum_k conj(x_{m,k}) y_{n,k}.
    pub dot_uu: Vec<C64>,
    pub dot_dd: Vec<C64>,
    pub dot_ud: Vec<C64>,
    pub dot_du: Vec<C64>,
    /// Frequency-weighted dots sum_k w_k conj(f_{m,k}) f_{n,k}.
    pub wdot_uu: Vec<C64>,
    pub wdot_dd: Vec<C64>,
    /// Row norms sum_k |x_{n,k}|^2.
    pub row_norm_up: Vec<f64>,
    pub row_norm_down: Vec<f64>,
    /// Row couplings: sum_k c_k x_{n,k} and sum_k d_k x_{n,k} with
    /// c = (lambda+gamma)/2, d = (gamma-lambda)/2.
    pub c_up: Vec<C64>,
    pub c_down: Vec<C64>,
    pub d_up: Vec<C64>,
    pub d_down: Vec<C64>,
}

impl OverlapKernels {
    #[inline]
    pub fn idx(&self, m: usize, n: usize) -> usize {
        m * self.n + n
    }
}

/// Evaluate every pairwise kernel for `state` against `bath`.
pub fn compute_kernels(
    state: &VariationalState,
    bath: &DiscretizedBath,
    spec: &ModelSpec,
) -> Result<OverlapKernels, AnsatzError> {
    if state.num_modes != bath.num_modes() {
        return Err(AnsatzError::DimensionMismatch {
            state_modes: state.num_modes,
            bath_modes: bath.num_modes(),
        });
    }
    let n = state.num_components;
    let m = state.num_modes;
    let half_eps = 0.5 * spec.epsilon;
    let half_delta = 0.5 * spec.delta;

    let mut row_norm_up = vec![0.0; n];
    let mut row_norm_down = vec![0.0; n];
    let mut c_up = vec![C64::new(0.0, 0.0); n];
    let mut c_down = vec![C64::new(0.0, 0.0); n];
    let mut d_up = vec![C64::new(0.0, 0.0); n];
    let mut d_down = vec![C64::new(0.0, 0.0); n];

    for i in 0..n {
        let fu = state.disp_up_row(i);
        let fd = state.disp_down_row(i);
        let (mut nu, mut nd) = (0.0, 0.0);
        let (mut cu, mut cd) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        let (mut du, mut dd) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        for k in 0..m {
            nu += fu[k].norm_sqr();
            nd += fd[k].norm_sqr();
            cu += bath.half_sum[k] * fu[k];
            cd += bath.half_sum[k] * fd[k];
            du += bath.half_diff[k] * fu[k];
            dd += bath.half_diff[k] * fd[k];
        }
        row_norm_up[i] = nu;
        row_norm_down[i] = nd;
        c_up[i] = cu;
        c_down[i] = cd;
        d_up[i] = du;
        d_down[i] = dd;
    }

    let size = n * n;
    let zero = C64::new(0.0, 0.0);
    let mut dot_uu = vec![zero; size];
    let mut dot_dd = vec![zero; size];
    let mut dot_ud = vec![zero; size];
    let mut dot_du = vec![zero; size];
    let mut wdot_uu = vec![zero; size];
    let mut wdot_dd = vec![zero; size];

    for row in 0..n {
        let fu_m = state.disp_up_row(row);
        let fd_m = state.disp_down_row(row);
        for col in 0..n {
            let fu_n = state.disp_up_row(col);
            let fd_n = state.disp_down_row(col);
            let (mut suu, mut sdd, mut sud, mut sdu) = (zero, zero, zero, zero);
            let (mut wuu, mut wdd) = (zero, zero);
            for k in 0..m {
                let um = fu_m[k].conj();
                let dm = fd_m[k].conj();
                let uu = um * fu_n[k];
                let dd = dm * fd_n[k];
                suu += uu;
                sdd += dd;
                sud += um * fd_n[k];
                sdu += dm * fu_n[k];
                wuu += bath.omega[k] * uu;
                wdd += bath.omega[k] * dd;
            }
            let idx = row * n + col;
            dot_uu[idx] = suu;
            dot_dd[idx] = sdd;
            dot_ud[idx] = sud;
            dot_du[idx] = sdu;
            wdot_uu[idx] = wuu;
            wdot_dd[idx] = wdd;
        }
    }

    let mut ovl_uu = vec![zero; size];
    let mut ovl_dd = vec![zero; size];
    let mut ovl_ud = vec![zero; size];
    let mut ovl_du = vec![zero; size];
    let mut h_uu = vec![zero; size];
    let mut h_dd = vec![zero; size];
    let mut h_ud = vec![zero; size];
    let mut h_du = vec![zero; size];

    for row in 0..n {
        for col in 0..n {
            let idx = row * n + col;
            if row == col {
                // <f_n|f_n> = 1 identically.
                ovl_uu[idx] = C64::new(1.0, 0.0);
                ovl_dd[idx] = C64::new(1.0, 0.0);
            } else {
                ovl_uu[idx] =
                    (dot_uu[idx] - 0.5 * (row_norm_up[row] + row_norm_up[col])).exp();
                ovl_dd[idx] =
                    (dot_dd[idx] - 0.5 * (row_norm_down[row] + row_norm_down[col])).exp();
            }
            ovl_ud[idx] = (dot_ud[idx] - 0.5 * (row_norm_up[row] + row_norm_down[col])).exp();
            ovl_du[idx] = (dot_du[idx] - 0.5 * (row_norm_down[row] + row_norm_up[col])).exp();

            h_uu[idx] = wdot_uu[idx] + c_up[row].conj() + c_up[col] + half_eps;
            h_dd[idx] = wdot_dd[idx] - c_down[row].conj() - c_down[col] - half_eps;
            h_ud[idx] = d_up[row].conj() - d_down[col] - half_delta;
            h_du[idx] = d_up[col] - d_down[row].conj() - half_delta;
        }
    }

    Ok(OverlapKernels {
        n,
        ovl_uu,
        ovl_dd,
        ovl_ud,
        ovl_du,
        h_uu,
        h_dd,
        h_ud,
        h_du,
        dot_uu,
        dot_dd,
        dot_ud,
        dot_du,
        wdot_uu,
        wdot_dd,
        row_norm_up,
        row_norm_down,
        c_up,
        c_down,
        d_up,
        d_down,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyEval {
    /// E = H / N.
    pub energy: f64,
    /// Hamiltonian expectation (unnormalized).
    pub hamiltonian: f64,
    /// Squared norm of the trial state.
    pub norm: f64,
}

/// Variational energy of `state` with precomputed kernels.
pub fn energy(state: &VariationalState, kernels: &OverlapKernels) -> Result<EnergyEval, AnsatzError> {
    let n = state.num_components;
    let mut ham = C64::new(0.0, 0.0);
    let mut norm = C64::new(0.0, 0.0);
    // Gross magnitudes set the rounding scale of the imaginary residues.
    let mut gross_h = 0.0f64;
    let mut gross_n = 0.0f64;
    for m in 0..n {
        let au = state.weight_up[m].conj();
        let bd = state.weight_down[m].conj();
        for k in 0..n {
            let idx = m * n + k;
            let auu = au * state.weight_up[k] * kernels.ovl_uu[idx];
            let bdd = bd * state.weight_down[k] * kernels.ovl_dd[idx];
            norm += auu + bdd;
            gross_n += auu.norm() + bdd.norm();
            let t1 = auu * kernels.h_uu[idx];
            let t2 = bdd * kernels.h_dd[idx];
            let t3 = au * state.weight_down[k] * kernels.ovl_ud[idx] * kernels.h_ud[idx];
            let t4 = bd * state.weight_up[k] * kernels.ovl_du[idx] * kernels.h_du[idx];
            ham += t1 + t2 + t3 + t4;
            gross_h += t1.norm() + t2.norm() + t3.norm() + t4.norm();
        }
    }
    debug_assert!(
        norm.im.abs() <= 1e-10 * gross_n.max(1e-30),
        "norm has imaginary residue {norm:?}"
    );
    debug_assert!(
        ham.im.abs() <= 1e-10 * gross_h.max(1e-12),
        "hamiltonian has imaginary residue {ham:?} (gross {gross_h:.3e})"
    );
    if norm.re < 1e-14 {
        return Err(AnsatzError::DegenerateNorm { norm: norm.re });
    }
    Ok(EnergyEval { energy: ham.re / norm.re, hamiltonian: ham.re, norm: norm.re })
}

/// Convenience wrapper recomputing kernels.
pub fn energy_of(
    state: &VariationalState,
    bath: &DiscretizedBath,
    spec: &ModelSpec,
) -> Result<EnergyEval, AnsatzError> {
    let kernels = compute_kernels(state, bath, spec)?;
    energy(state, &kernels)
}

/// Energy split into bath, sigma_z coupling (including the bias term),
/// off-diagonal coupling, and tunneling channels; each normalized so the
/// four parts sum to the variational energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyDecomposition {
    pub bath: f64,
    pub diagonal: f64,
    pub offdiagonal: f64,
    pub tunneling: f64,
}

impl EnergyDecomposition {
    pub fn total(&self) -> f64 {
        self.bath + self.diagonal + self.offdiagonal + self.tunneling
    }
}

pub fn energy_decomposition(
    state: &VariationalState,
    kernels: &OverlapKernels,
    spec: &ModelSpec,
) -> Result<EnergyDecomposition, AnsatzError> {
    let n = state.num_components;
    let zero = C64::new(0.0, 0.0);
    let (mut bath_e, mut diag_e, mut off_e, mut tun_e, mut norm) =
        (zero, zero, zero, zero, zero);
    for m in 0..n {
        let au = state.weight_up[m].conj();
        let bd = state.weight_down[m].conj();
        for k in 0..n {
            let idx = m * n + k;
            let auu = au * state.weight_up[k] * kernels.ovl_uu[idx];
            let bdd = bd * state.weight_down[k] * kernels.ovl_dd[idx];
            let aud = au * state.weight_down[k] * kernels.ovl_ud[idx];
            let bdu = bd * state.weight_up[k] * kernels.ovl_du[idx];
            norm += auu + bdd;
            bath_e += auu * kernels.wdot_uu[idx] + bdd * kernels.wdot_dd[idx];
            diag_e += auu * (kernels.c_up[m].conj() + kernels.c_up[k] + 0.5 * spec.epsilon)
                - bdd * (kernels.c_down[m].conj() + kernels.c_down[k] + 0.5 * spec.epsilon);
            off_e += aud * (kernels.d_up[m].conj() - kernels.d_down[k])
                + bdu * (kernels.d_up[k] - kernels.d_down[m].conj());
            tun_e += -0.5 * spec.delta * (aud + bdu);
        }
    }
    if norm.re < 1e-14 {
        return Err(AnsatzError::DegenerateNorm { norm: norm.re });
    }
    Ok(EnergyDecomposition {
        bath: bath_e.re / norm.re,
        diagonal: diag_e.re / norm.re,
        offdiagonal: off_e.re / norm.re,
        tunneling: tun_e.re / norm.re,
    })
}

/// Coefficients of one spin-sector block of the Hamiltonian, at most
/// quadratic in bosonic operators: scalar + raise_k b+_k + lower_k b_k +
/// [number] w_k b+_k b_k.
struct SectorOp<'a> {
    scalar: f64,
    raise: &'a [f64],
    lower: &'a [f64],
    number: Option<&'a [f64]>,
}

/// <u| P Q |v> / <u|v> for normal-ordered sector blocks P, Q: the product of
/// the two classical substitutions plus the single-contraction correction.
fn sector_pair_value(p: &SectorOp, q: &SectorOp, bra: &[C64], ket: &[C64]) -> C64 {
    let mut p_bar = C64::new(p.scalar, 0.0);
    let mut q_bar = C64::new(q.scalar, 0.0);
    let mut corr = C64::new(0.0, 0.0);
    for k in 0..bra.len() {
        let u = bra[k].conj();
        let v = ket[k];
        let uv = u * v;
        p_bar += p.raise[k] * u + p.lower[k] * v;
        q_bar += q.raise[k] * u + q.lower[k] * v;
        let mut p_low = C64::new(p.lower[k], 0.0);
        let mut q_raise = C64::new(q.raise[k], 0.0);
        if let Some(w) = p.number {
            p_bar += w[k] * uv;
            p_low += w[k] * u;
        }
        if let Some(w) = q.number {
            q_bar += w[k] * uv;
            q_raise += w[k] * v;
        }
        corr += p_low * q_raise;
    }
    p_bar * q_bar + corr
}

/// Unnormalized second moment <Psi| H^2 |Psi>, evaluated analytically from
/// normal-ordered coherent-state matrix elements. Together with the energy
/// this yields the ground-state energy variance.
pub fn hamiltonian_second_moment(
    state: &VariationalState,
    kernels: &OverlapKernels,
    bath: &DiscretizedBath,
    spec: &ModelSpec,
) -> C64 {
    let n = state.num_components;
    let m = state.num_modes;
    let neg_half_sum: Vec<f64> = bath.half_sum.iter().map(|c| -c).collect();
    let neg_half_diff: Vec<f64> = bath.half_diff.iter().map(|d| -d).collect();

    // Block structure of H in the spin basis: up-row gets O_uu and O_ud,
    // down-row gets O_du and O_dd.
    let o_uu = SectorOp {
        scalar: 0.5 * spec.epsilon,
        raise: &bath.half_sum,
        lower: &bath.half_sum,
        number: Some(&bath.omega),
    };
    let o_dd = SectorOp {
        scalar: -0.5 * spec.epsilon,
        raise: &neg_half_sum,
        lower: &neg_half_sum,
        number: Some(&bath.omega),
    };
    let o_ud = SectorOp {
        scalar: -0.5 * spec.delta,
        raise: &bath.half_diff,
        lower: &neg_half_diff,
        number: None,
    };
    let o_du = SectorOp {
        scalar: -0.5 * spec.delta,
        raise: &neg_half_diff,
        lower: &bath.half_diff,
        number: None,
    };

    let mut total = C64::new(0.0, 0.0);
    for row in 0..n {
        let fu_m = &state.disp_up[row * m..(row + 1) * m];
        let fd_m = &state.disp_down[row * m..(row + 1) * m];
        let au = state.weight_up[row].conj();
        let bd = state.weight_down[row].conj();
        for col in 0..n {
            let fu_n = &state.disp_up[col * m..(col + 1) * m];
            let fd_n = &state.disp_down[col * m..(col + 1) * m];
            let idx = row * n + col;

            let uu = sector_pair_value(&o_uu, &o_uu, fu_m, fu_n)
                + sector_pair_value(&o_ud, &o_du, fu_m, fu_n);
            let ud = sector_pair_value(&o_uu, &o_ud, fu_m, fd_n)
                + sector_pair_value(&o_ud, &o_dd, fu_m, fd_n);
            let du = sector_pair_value(&o_du, &o_uu, fd_m, fu_n)
                + sector_pair_value(&o_dd, &o_du, fd_m, fu_n);
            let dd = sector_pair_value(&o_du, &o_ud, fd_m, fd_n)
                + sector_pair_value(&o_dd, &o_dd, fd_m, fd_n);

            total += au * state.weight_up[col] * kernels.ovl_uu[idx] * uu
                + au * state.weight_down[col] * kernels.ovl_ud[idx] * ud
                + bd * state.weight_up[col] * kernels.ovl_du[idx] * du
                + bd * state.weight_down[col] * kernels.ovl_dd[idx] * dd;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{discretize_bath, CouplingCase, ModelSpec};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_pcg::Pcg64;

    fn small_spec(case: CouplingCase, delta: f64, alpha: f64) -> ModelSpec {
        ModelSpec {
            s: 0.3,
            alpha,
            delta,
            epsilon: 0.0,
            omega_c: 1.0,
            lambda_grid: 2.0,
            num_modes: 2,
            coupling: case,
        }
    }

    pub(crate) fn random_state(n: usize, m: usize, scale: f64, seed: u64) -> VariationalState {
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
    fn identical_rows_give_unit_overlap() {
        let spec = small_spec(CouplingCase::Diagonal, 0.1, 0.05);
        let bath = discretize_bath(&spec).unwrap();
        let mut state = random_state(2, 2, 0.7, 11);
        let row: Vec<C64> = state.disp_up_row(0).to_vec();
        state.disp_up[2..4].copy_from_slice(&row);
        let kernels = compute_kernels(&state, &bath, &spec).unwrap();
        let off = kernels.ovl_uu[kernels.idx(0, 1)];
        assert!((off - C64::new(1.0, 0.0)).norm() < 1e-14);
        assert_eq!(kernels.ovl_uu[kernels.idx(0, 0)], C64::new(1.0, 0.0));
    }

    #[test]
    fn closed_form_exponent_against_zero_row() {
        // f_m = 0 and sum |f_n|^2 = 2 gives |<f_m|f_n>| = exp(-1).
        let spec = small_spec(CouplingCase::Diagonal, 0.1, 0.05);
        let bath = discretize_bath(&spec).unwrap();
        let mut state = VariationalState::zeros(2, 2);
        state.weight_up[0] = C64::new(1.0, 0.0);
        state.weight_up[1] = C64::new(1.0, 0.0);
        state.disp_up[2] = C64::new(1.0, 0.0);
        state.disp_up[3] = C64::new(0.0, 1.0);
        let kernels = compute_kernels(&state, &bath, &spec).unwrap();
        let f01 = kernels.ovl_uu[kernels.idx(0, 1)];
        assert!((f01.norm() - (-1.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn overlap_magnitudes_bounded_by_one() {
        let spec = small_spec(CouplingCase::RotatingWave, 0.05, 0.1);
        let bath = discretize_bath(&spec).unwrap();
        for seed in 0..20 {
            let state = random_state(3, 2, 1.5, seed);
            let kernels = compute_kernels(&state, &bath, &spec).unwrap();
            for v in kernels
                .ovl_uu
                .iter()
                .chain(&kernels.ovl_dd)
                .chain(&kernels.ovl_ud)
                .chain(&kernels.ovl_du)
            {
                assert!(v.norm() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn kernel_conjugate_symmetries() {
        let spec = small_spec(CouplingCase::CounterRotatingWave, 0.07, 0.08);
        let bath = discretize_bath(&spec).unwrap();
        for seed in 0..50 {
            let state = random_state(3, 2, 1.0, 1000 + seed);
            let k = compute_kernels(&state, &bath, &spec).unwrap();
            for a in 0..3 {
                for b in 0..3 {
                    let ij = k.idx(a, b);
                    let ji = k.idx(b, a);
                    assert!((k.ovl_uu[ij] - k.ovl_uu[ji].conj()).norm() < 1e-14);
                    assert!((k.ovl_dd[ij] - k.ovl_dd[ji].conj()).norm() < 1e-14);
                    // K_{m,n} = Gamma*_{n,m}
                    assert!((k.ovl_du[ij] - k.ovl_ud[ji].conj()).norm() < 1e-14);
                    assert!((k.h_uu[ij] - k.h_uu[ji].conj()).norm() < 1e-13);
                    assert!((k.h_dd[ij] - k.h_dd[ji].conj()).norm() < 1e-13);
                    // dd_{m,n} = cc*_{n,m}
                    assert!((k.h_du[ij] - k.h_ud[ji].conj()).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn free_state_energy_is_bare_tunneling() {
        let spec = small_spec(CouplingCase::Diagonal, 0.1, 0.05);
        let bath = discretize_bath(&spec).unwrap();
        let state = VariationalState::free_state(1, 2);
        let eval = energy_of(&state, &bath, &spec).unwrap();
        assert!((eval.energy + 0.05).abs() < 1e-14);
        assert!((eval.norm - 1.0).abs() < 1e-14);
    }

    #[test]
    fn displaced_up_branch_energy_is_completed_square() {
        // A = 1, B = 0, f_k = -(lambda_k + gamma_k) / (2 w_k):
        // E = -sum (lambda_k + gamma_k)^2 / (4 w_k).
        for case in [CouplingCase::Diagonal, CouplingCase::RotatingWave] {
            let spec = small_spec(case, 0.0, 0.08);
            let bath = discretize_bath(&spec).unwrap();
            let mut state = VariationalState::zeros(1, 2);
            state.weight_up[0] = C64::new(1.0, 0.0);
            for k in 0..2 {
                state.disp_up[k] = C64::new(-bath.half_sum[k] / bath.omega[k], 0.0);
            }
            let eval = energy_of(&state, &bath, &spec).unwrap();
            let expected: f64 = (0..2)
                .map(|k| -(bath.half_sum[k] * 2.0).powi(2) / (4.0 * bath.omega[k]))
                .sum();
            assert!((eval.energy - expected).abs() < 1e-14, "{case:?}");
        }
    }

    #[test]
    fn energy_gauge_and_scale_invariant() {
        let spec = small_spec(CouplingCase::OffDiagonal, 0.06, 0.04);
        let bath = discretize_bath(&spec).unwrap();
        for seed in 0..30 {
            let state = random_state(2, 2, 0.8, 2000 + seed);
            let e0 = energy_of(&state, &bath, &spec).unwrap().energy;
            let mut scaled = state.clone();
            let c = C64::new(0.37, -1.21);
            for w in scaled.weight_up.iter_mut().chain(scaled.weight_down.iter_mut()) {
                *w *= c;
            }
            let e1 = energy_of(&scaled, &bath, &spec).unwrap().energy;
            assert!((e0 - e1).abs() < 1e-11 * e0.abs().max(1.0));
        }
    }

    #[test]
    fn z2_reflection_preserves_energy_at_zero_bias() {
        for case in [
            CouplingCase::Diagonal,
            CouplingCase::OffDiagonal,
            CouplingCase::RotatingWave,
            CouplingCase::CounterRotatingWave,
        ] {
            let spec = small_spec(case, 0.05, 0.06);
            let bath = discretize_bath(&spec).unwrap();
            for seed in 0..20 {
                let state = random_state(2, 2, 0.9, 3000 + seed);
                let e0 = energy_of(&state, &bath, &spec).unwrap().energy;
                let e1 = energy_of(&state.z2_reflected(), &bath, &spec).unwrap().energy;
                assert!((e0 - e1).abs() < 1e-12 * e0.abs().max(1.0), "{case:?}");
            }
        }
    }

    #[test]
    fn tunneling_sign_inversion_with_branch_flip() {
        // Diagonal case: E(delta; A, B) = E(-delta; A, -B) state by state.
        let spec = small_spec(CouplingCase::Diagonal, 0.05, 0.06);
        let mut mirror = spec.clone();
        mirror.delta = -spec.delta;
        let bath = discretize_bath(&spec).unwrap();
        for seed in 0..20 {
            let state = random_state(2, 2, 0.9, 4000 + seed);
            let e0 = energy_of(&state, &bath, &spec).unwrap().energy;
            let e1 = energy_of(&state.down_branch_negated(), &bath, &mirror).unwrap().energy;
            assert!((e0 - e1).abs() < 1e-12 * e0.abs().max(1.0));
        }
        // RW <-> CRW mirror under the same transformation.
        let rw = small_spec(CouplingCase::RotatingWave, 0.05, 0.06);
        let mut crw = small_spec(CouplingCase::CounterRotatingWave, -0.05, 0.06);
        crw.delta = -rw.delta;
        let bath_rw = discretize_bath(&rw).unwrap();
        let bath_crw = discretize_bath(&crw).unwrap();
        for seed in 0..20 {
            let state = random_state(2, 2, 0.9, 5000 + seed);
            let e0 = energy_of(&state, &bath_rw, &rw).unwrap().energy;
            let e1 = energy_of(&state.down_branch_negated(), &bath_crw, &crw).unwrap().energy;
            assert!((e0 - e1).abs() < 1e-12 * e0.abs().max(1.0));
        }
    }

    #[test]
    fn decomposition_sums_to_energy() {
        for case in [
            CouplingCase::Diagonal,
            CouplingCase::OffDiagonal,
            CouplingCase::RotatingWave,
            CouplingCase::CounterRotatingWave,
        ] {
            let spec = small_spec(case, 0.05, 0.07);
            let bath = discretize_bath(&spec).unwrap();
            for seed in 0..20 {
                let state = random_state(3, 2, 0.8, 6000 + seed);
                let kernels = compute_kernels(&state, &bath, &spec).unwrap();
                let eval = energy(&state, &kernels).unwrap();
                let parts = energy_decomposition(&state, &kernels, &spec).unwrap();
                assert!(
                    (parts.total() - eval.energy).abs() < 1e-12,
                    "{case:?}: {} vs {}",
                    parts.total(),
                    eval.energy
                );
            }
        }
    }

    #[test]
    fn free_state_decomposition() {
        let spec = small_spec(CouplingCase::RotatingWave, 0.1, 0.05);
        let bath = discretize_bath(&spec).unwrap();
        let state = VariationalState::free_state(2, 2);
        let kernels = compute_kernels(&state, &bath, &spec).unwrap();
        let parts = energy_decomposition(&state, &kernels, &spec).unwrap();
        assert!(parts.bath.abs() < 1e-15);
        assert!(parts.diagonal.abs() < 1e-15);
        assert!(parts.offdiagonal.abs() < 1e-15);
        assert!((parts.tunneling + 0.05).abs() < 1e-14);
    }

    #[test]
    fn diagonal_case_offdiagonal_channel_vanishes_identically() {
        let spec = small_spec(CouplingCase::Diagonal, 0.05, 0.09);
        let bath = discretize_bath(&spec).unwrap();
        for seed in 0..30 {
            let state = random_state(3, 2, 1.2, 7000 + seed);
            let kernels = compute_kernels(&state, &bath, &spec).unwrap();
            let parts = energy_decomposition(&state, &kernels, &spec).unwrap();
            assert!(parts.offdiagonal.abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_norm_is_reported() {
        let spec = small_spec(CouplingCase::Diagonal, 0.1, 0.05);
        let bath = discretize_bath(&spec).unwrap();
        let state = VariationalState::zeros(2, 2);
        match energy_of(&state, &bath, &spec) {
            Err(AnsatzError::DegenerateNorm { .. }) => {}
            other => panic!("expected degenerate norm, got {other:?}"),
        }
    }

    #[test]
    fn second_moment_of_free_state_equals_energy_squared() {
        // Exact eigenstate: <H^2> = <H>^2.
        let spec = small_spec(CouplingCase::Diagonal, 0.1, 0.0);
        let bath = discretize_bath(&spec).unwrap();
        let state = VariationalState::free_state(1, 2);
        let kernels = compute_kernels(&state, &bath, &spec).unwrap();
        let eval = energy(&state, &kernels).unwrap();
        let h2 = hamiltonian_second_moment(&state, &kernels, &bath, &spec);
        let variance = h2.re / eval.norm - eval.energy * eval.energy;
        assert!(variance.abs() < 1e-12, "variance = {variance}");
        assert!(h2.im.abs() < 1e-12);
    }
}
