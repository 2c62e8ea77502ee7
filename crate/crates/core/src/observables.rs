//! Ground-state observables of the variational state: spin expectations,
//! spin-bath entanglement entropy, per-mode quadrature statistics, parity,
//! total excitation number, and the real averaged wavefunction structure
//! used to classify phases.

use crate::ansatz::{AnsatzError, OverlapKernels, VariationalState};
use crate::bath::DiscretizedBath;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

/// Everything measured on one converged state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSet {
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub sigma_z: f64,
    /// Von Neumann entropy of the reduced spin state, base 2.
    pub entropy: f64,
    /// Total excitation number.
    pub n_ex: f64,
    pub parity: f64,
    /// Reduced spin density matrix entries (rho_du is the conjugate of rho_ud).
    pub rho_uu: f64,
    pub rho_dd: f64,
    pub rho_ud: C64,
    /// Departure from minimum uncertainty per mode, aligned with the bath
    /// frequency table.
    pub qf: Vec<f64>,
    pub qf_max: f64,
    pub qf_max_omega: f64,
    pub x_mean: Vec<f64>,
    pub p_mean: Vec<f64>,
    pub var_x: Vec<f64>,
    pub var_p: Vec<f64>,
    /// Averaged coherent-state weights; a_bar is positive by convention and
    /// b_bar carries the sign of the spin coherence.
    pub a_bar: f64,
    pub b_bar: f64,
    /// False when |<sigma_x>| is too small to define the sign of b_bar.
    pub b_bar_sign_defined: bool,
    pub f_bar: Vec<f64>,
    pub g_bar: Vec<f64>,
}

fn pair_coefficients(
    state: &VariationalState,
    kernels: &OverlapKernels,
) -> (Vec<C64>, Vec<C64>, Vec<C64>, Vec<C64>, f64) {
    let n = state.num_components;
    let mut p_uu = vec![C64::new(0.0, 0.0); n * n];
    let mut p_dd = vec![C64::new(0.0, 0.0); n * n];
    let mut p_ud = vec![C64::new(0.0, 0.0); n * n];
    let mut p_du = vec![C64::new(0.0, 0.0); n * n];
    let mut norm = C64::new(0.0, 0.0);
    for m in 0..n {
        let au = state.weight_up[m].conj();
        let bd = state.weight_down[m].conj();
        for k in 0..n {
            let idx = m * n + k;
            p_uu[idx] = au * state.weight_up[k] * kernels.ovl_uu[idx];
            p_dd[idx] = bd * state.weight_down[k] * kernels.ovl_dd[idx];
            p_ud[idx] = au * state.weight_down[k] * kernels.ovl_ud[idx];
            p_du[idx] = bd * state.weight_up[k] * kernels.ovl_du[idx];
            norm += p_uu[idx] + p_dd[idx];
        }
    }
    (p_uu, p_dd, p_ud, p_du, norm.re)
}

/// (<sigma_x>, <sigma_y>, <sigma_z>).
pub fn spin_expectations(
    state: &VariationalState,
    kernels: &OverlapKernels,
) -> Result<(f64, f64, f64), AnsatzError> {
    let (p_uu, p_dd, p_ud, p_du, norm) = pair_coefficients(state, kernels);
    if norm < 1e-14 {
        return Err(AnsatzError::DegenerateNorm { norm });
    }
    let up: C64 = p_uu.iter().sum();
    let down: C64 = p_dd.iter().sum();
    let cross_ud: C64 = p_ud.iter().sum();
    let cross_du: C64 = p_du.iter().sum();
    let sx = cross_ud + cross_du;
    let sy = C64::new(0.0, 1.0) * (cross_du - cross_ud);
    let sz = up - down;
    debug_assert!(sx.im.abs() < 1e-10 * norm.max(1.0));
    debug_assert!(sy.im.abs() < 1e-10 * norm.max(1.0));
    debug_assert!(sz.im.abs() < 1e-10 * norm.max(1.0));
    Ok((sx.re / norm, sy.re / norm, sz.re / norm))
}

/// Reduced spin density matrix and its von Neumann entropy (base 2).
pub fn reduced_density_entropy(
    state: &VariationalState,
    kernels: &OverlapKernels,
) -> Result<(f64, f64, C64, f64), AnsatzError> {
    let (p_uu, p_dd, p_ud, _, norm) = pair_coefficients(state, kernels);
    if norm < 1e-14 {
        return Err(AnsatzError::DegenerateNorm { norm });
    }
    let rho_uu = p_uu.iter().sum::<C64>().re / norm;
    let rho_dd = p_dd.iter().sum::<C64>().re / norm;
    let rho_ud = p_ud.iter().sum::<C64>() / norm;
    debug_assert!((rho_uu + rho_dd - 1.0).abs() < 1e-12);
    let gap = ((rho_uu - rho_dd).powi(2) + 4.0 * rho_ud.norm_sqr()).sqrt();
    let entropy = [0.5 * (1.0 + gap), 0.5 * (1.0 - gap)]
        .iter()
        .map(|&p| {
            let p = p.clamp(0.0, 1.0);
            if p > 1e-300 {
                -p * p.log2()
            } else {
                0.0
            }
        })
        .sum();
    Ok((rho_uu, rho_dd, rho_ud, entropy))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureStats {
    pub x_mean: f64,
    pub p_mean: f64,
    pub var_x: f64,
    pub var_p: f64,
    /// var_x * var_p - 1/4, non-negative by the uncertainty relation.
    pub qf: f64,
}

/// First and second quadrature moments for every bath mode.
pub fn all_quadratures(
    state: &VariationalState,
    kernels: &OverlapKernels,
) -> Result<Vec<QuadratureStats>, AnsatzError> {
    let (p_uu, p_dd, _, _, norm) = pair_coefficients(state, kernels);
    if norm < 1e-14 {
        return Err(AnsatzError::DegenerateNorm { norm });
    }
    let n = state.num_components;
    let m = state.num_modes;
    let zero = C64::new(0.0, 0.0);
    let mut b_mean = vec![zero; m];
    let mut b_sq = vec![zero; m];
    let mut occupancy = vec![zero; m];
    for row in 0..n {
        let fu_m = state.disp_up_row(row);
        let fd_m = state.disp_down_row(row);
        for col in 0..n {
            let idx = row * n + col;
            let (cu, cd) = (p_uu[idx], p_dd[idx]);
            if cu == zero && cd == zero {
                continue;
            }
            let fu_n = state.disp_up_row(col);
            let fd_n = state.disp_down_row(col);
            for k in 0..m {
                b_mean[k] += cu * fu_n[k] + cd * fd_n[k];
                b_sq[k] += cu * fu_n[k] * fu_n[k] + cd * fd_n[k] * fd_n[k];
                occupancy[k] +=
                    cu * fu_m[k].conj() * fu_n[k] + cd * fd_m[k].conj() * fd_n[k];
            }
        }
    }
    let stats = (0..m)
        .map(|k| {
            let b = b_mean[k] / norm;
            let b2 = b_sq[k] / norm;
            let occ = occupancy[k] / norm;
            debug_assert!(occ.im.abs() < 1e-10);
            let x = std::f64::consts::SQRT_2 * b.re;
            let p = std::f64::consts::SQRT_2 * b.im;
            let x2 = 0.5 * (2.0 * b2.re + 2.0 * occ.re + 1.0);
            let p2 = 0.5 * (1.0 + 2.0 * occ.re - 2.0 * b2.re);
            let var_x = x2 - x * x;
            let var_p = p2 - p * p;
            QuadratureStats { x_mean: x, p_mean: p, var_x, var_p, qf: var_x * var_p - 0.25 }
        })
        .collect();
    Ok(stats)
}

/// Quadrature statistics of a single mode.
pub fn quadrature_statistics(
    state: &VariationalState,
    kernels: &OverlapKernels,
    mode: usize,
) -> Result<QuadratureStats, AnsatzError> {
    assert!(mode < state.num_modes, "mode index out of range");
    Ok(all_quadratures(state, kernels)?[mode])
}

/// Expectation of the parity operator sigma_x exp(i pi sum b+b). The bath
/// factor negates ket displacements, so the matrix elements are Debye-Waller
/// factors with flipped ket rows, assembled from the stored pair dots.
pub fn parity(state: &VariationalState, kernels: &OverlapKernels) -> Result<f64, AnsatzError> {
    let n = state.num_components;
    let mut acc = C64::new(0.0, 0.0);
    let mut norm = C64::new(0.0, 0.0);
    for m in 0..n {
        let au = state.weight_up[m].conj();
        let bd = state.weight_down[m].conj();
        for k in 0..n {
            let idx = m * n + k;
            norm += au * state.weight_up[k] * kernels.ovl_uu[idx]
                + bd * state.weight_down[k] * kernels.ovl_dd[idx];
            let flipped_ud = (-kernels.dot_ud[idx]
                - 0.5 * (kernels.row_norm_up[m] + kernels.row_norm_down[k]))
                .exp();
            let flipped_du = (-kernels.dot_du[idx]
                - 0.5 * (kernels.row_norm_down[m] + kernels.row_norm_up[k]))
                .exp();
            acc += au * state.weight_down[k] * flipped_ud + bd * state.weight_up[k] * flipped_du;
        }
    }
    if norm.re < 1e-14 {
        return Err(AnsatzError::DegenerateNorm { norm: norm.re });
    }
    debug_assert!(acc.im.abs() < 1e-10 * norm.re.max(1.0));
    Ok(acc.re / norm.re)
}

/// Total excitation number <sum b+b> + <sigma_+ sigma_-> with
/// sigma_+ sigma_- = (1 - sigma_x)/2.
pub fn excitation_number(
    state: &VariationalState,
    kernels: &OverlapKernels,
) -> Result<f64, AnsatzError> {
    let (p_uu, p_dd, _, _, norm) = pair_coefficients(state, kernels);
    if norm < 1e-14 {
        return Err(AnsatzError::DegenerateNorm { norm });
    }
    let n = state.num_components;
    let mut occ = C64::new(0.0, 0.0);
    for idx in 0..n * n {
        occ += p_uu[idx] * kernels.dot_uu[idx] + p_dd[idx] * kernels.dot_dd[idx];
    }
    let (sx, _, _) = spin_expectations(state, kernels)?;
    debug_assert!(occ.im.abs() < 1e-10 * norm.max(1.0));
    Ok(occ.re / norm + 0.5 * (1.0 - sx))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragedStructure {
    pub a_bar: f64,
    pub b_bar: f64,
    pub sign_defined: bool,
    pub f_bar: Vec<f64>,
    pub g_bar: Vec<f64>,
}

/// Real averaged weights and displacement profiles. a_bar is positive by
/// convention; b_bar takes the sign of the spin coherence, and the sign flag
/// is cleared when the coherence is too small to decide.
pub fn averaged_structure(
    state: &VariationalState,
    kernels: &OverlapKernels,
) -> Result<AveragedStructure, AnsatzError> {
    let (p_uu, p_dd, _, _, norm) = pair_coefficients(state, kernels);
    if norm < 1e-14 {
        return Err(AnsatzError::DegenerateNorm { norm });
    }
    let n = state.num_components;
    let m = state.num_modes;
    let up_weight = p_uu.iter().sum::<C64>().re / norm;
    let down_weight = p_dd.iter().sum::<C64>().re / norm;
    let a_bar = up_weight.max(0.0).sqrt();
    let (sx, _, _) = spin_expectations(state, kernels)?;
    let sign_defined = sx.abs() >= 1e-10;
    let b_mag = down_weight.max(0.0).sqrt();
    let b_bar = if sign_defined && sx < 0.0 { -b_mag } else { b_mag };

    let mut f_bar = vec![0.0; m];
    let mut g_bar = vec![0.0; m];
    for row in 0..n {
        let fu_m = state.disp_up_row(row);
        let fd_m = state.disp_down_row(row);
        for col in 0..n {
            let idx = row * n + col;
            let fu_n = state.disp_up_row(col);
            let fd_n = state.disp_down_row(col);
            let (cu, cd) = (p_uu[idx], p_dd[idx]);
            for k in 0..m {
                f_bar[k] += (cu * (fu_m[k].conj() + fu_n[k])).re;
                g_bar[k] += (cd * (fd_m[k].conj() + fd_n[k])).re;
            }
        }
    }
    let up_total = up_weight * norm;
    let down_total = down_weight * norm;
    for k in 0..m {
        f_bar[k] = if up_total > 1e-300 { f_bar[k] / (2.0 * up_total) } else { 0.0 };
        g_bar[k] = if down_total > 1e-300 { g_bar[k] / (2.0 * down_total) } else { 0.0 };
    }
    Ok(AveragedStructure { a_bar, b_bar, sign_defined, f_bar, g_bar })
}

/// Full observable suite for a state; the state does not need to be
/// pre-normalized.
pub fn observe_all(
    state: &VariationalState,
    kernels: &OverlapKernels,
    bath: &DiscretizedBath,
) -> Result<ObservableSet, AnsatzError> {
    let (sx, sy, sz) = spin_expectations(state, kernels)?;
    let (rho_uu, rho_dd, rho_ud, entropy) = reduced_density_entropy(state, kernels)?;
    let n_ex = excitation_number(state, kernels)?;
    let pi = parity(state, kernels)?;
    let quads = all_quadratures(state, kernels)?;
    let structure = averaged_structure(state, kernels)?;

    let mut qf_max = f64::NEG_INFINITY;
    let mut qf_max_omega = bath.omega[0];
    for (k, q) in quads.iter().enumerate() {
        if q.qf > qf_max {
            qf_max = q.qf;
            qf_max_omega = bath.omega[k];
        }
    }

    debug_assert!(sx * sx + sy * sy + sz * sz <= 1.0 + 1e-10);
    debug_assert!(pi.abs() <= 1.0 + 1e-10);
    debug_assert!((0.0..=1.0 + 1e-12).contains(&entropy));

    Ok(ObservableSet {
        sigma_x: sx,
        sigma_y: sy,
        sigma_z: sz,
        entropy,
        n_ex,
        parity: pi,
        rho_uu,
        rho_dd,
        rho_ud,
        qf: quads.iter().map(|q| q.qf).collect(),
        qf_max,
        qf_max_omega,
        x_mean: quads.iter().map(|q| q.x_mean).collect(),
        p_mean: quads.iter().map(|q| q.p_mean).collect(),
        var_x: quads.iter().map(|q| q.var_x).collect(),
        var_p: quads.iter().map(|q| q.var_p).collect(),
        a_bar: structure.a_bar,
        b_bar: structure.b_bar,
        b_bar_sign_defined: structure.sign_defined,
        f_bar: structure.f_bar,
        g_bar: structure.g_bar,
    })
}
