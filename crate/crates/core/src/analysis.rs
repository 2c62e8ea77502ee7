//! Post-processing of ground-state sweeps: phase classification, transition
//! location by several estimators, power-law and entropy fits, the optimal
//! displacement fit, and phase-map assembly over the tunneling-coupling
//! plane.

use crate::bath::DiscretizedBath;
use crate::linalg::{linear_fit, polyfit};
use crate::solver::GroundStateRecord;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("fit window spans {decades:.2} decades, need at least {need}")]
    WindowTooNarrow { decades: f64, need: f64 },
    #[error("no transition detected by {0}")]
    NoTransition(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("sweep must be sorted in alpha and certified (converged)")]
    BadSweep,
    #[error("invalid points: {0}")]
    InvalidPoints(String),
}

/// Ground-state phase labels across all coupling cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseLabel {
    /// U(1)-symmetric bare spin-x eigenstate times the bath vacuum.
    Free,
    /// Localized with positive spin coherence.
    LocalizedII,
    /// Odd-parity delocalized phase.
    OddDelocalized,
    /// Localized with negative spin coherence.
    LocalizedIV,
    EvenDelocalized,
    /// Localized with an undecided spin-coherence sign.
    Localized,
    Unclassified,
}

impl PhaseLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            PhaseLabel::Free => "free",
            PhaseLabel::LocalizedII => "localized_ii",
            PhaseLabel::OddDelocalized => "odd_delocalized",
            PhaseLabel::LocalizedIV => "localized_iv",
            PhaseLabel::EvenDelocalized => "even_delocalized",
            PhaseLabel::Localized => "localized",
            PhaseLabel::Unclassified => "unclassified",
        }
    }

    pub fn is_localized(&self) -> bool {
        matches!(self, PhaseLabel::LocalizedII | PhaseLabel::LocalizedIV | PhaseLabel::Localized)
    }

    pub fn is_delocalized(&self) -> bool {
        matches!(self, PhaseLabel::OddDelocalized | PhaseLabel::EvenDelocalized)
    }
}

/// Classification thresholds. The displacement threshold scales with the
/// largest classical per-mode displacement of the bath.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyTolerances {
    /// Excitation number below which a state counts as excitation-free.
    pub excitation: f64,
    /// Averaged displacement magnitude below which the bath counts as empty.
    pub displacement: f64,
    /// Parity distance from +/-1 (or 0) tolerated.
    pub parity: f64,
    /// Relative tolerance for symmetry relations between branch profiles.
    pub relative: f64,
}

impl ClassifyTolerances {
    pub fn for_bath(bath: &DiscretizedBath) -> Self {
        let classical = bath
            .eta
            .iter()
            .zip(&bath.omega)
            .map(|(e, w)| e / (2.0 * w))
            .fold(0.0f64, f64::max);
        ClassifyTolerances {
            excitation: 1e-4,
            displacement: 1e-3 * classical.max(1e-6),
            parity: 0.05,
            relative: 0.25,
        }
    }
}

fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Assign a phase label from the observable set of a certified record. No
/// label is forced: records matching no rule come back `Unclassified`.
pub fn classify_phase(record: &GroundStateRecord, tol: &ClassifyTolerances) -> PhaseLabel {
    let obs = &record.observables;
    let max_disp = max_abs(&obs.f_bar).max(max_abs(&obs.g_bar));

    if obs.n_ex < tol.excitation && max_disp < tol.displacement {
        return PhaseLabel::Free;
    }

    let antisym_err = obs
        .f_bar
        .iter()
        .zip(&obs.g_bar)
        .map(|(f, g)| (f + g).abs())
        .fold(0.0f64, f64::max);
    let sym_err = obs
        .f_bar
        .iter()
        .zip(&obs.g_bar)
        .map(|(f, g)| (f - g).abs())
        .fold(0.0f64, f64::max);
    let weights_equal =
        (obs.a_bar - obs.b_bar).abs() <= tol.relative * obs.a_bar.max(obs.b_bar.abs()).max(1e-12);
    let weights_opposite =
        (obs.a_bar + obs.b_bar).abs() <= tol.relative * obs.a_bar.max(obs.b_bar.abs()).max(1e-12);

    if obs.parity > 1.0 - tol.parity
        && antisym_err <= tol.relative * max_disp.max(tol.displacement)
        && weights_equal
    {
        return PhaseLabel::EvenDelocalized;
    }
    if obs.parity < -1.0 + tol.parity
        && antisym_err <= tol.relative * max_disp.max(tol.displacement)
        && weights_opposite
    {
        return PhaseLabel::OddDelocalized;
    }
    if obs.parity.abs() < tol.parity
        && sym_err <= tol.relative * max_disp.max(tol.displacement)
        && record.degenerate_partner
    {
        return if obs.sigma_x > 1e-6 {
            PhaseLabel::LocalizedII
        } else if obs.sigma_x < -1e-6 {
            PhaseLabel::LocalizedIV
        } else {
            PhaseLabel::Localized
        };
    }
    PhaseLabel::Unclassified
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// RMS residual in log space.
    pub residual: f64,
    /// Exponent uncertainty: the larger of the two-subgroup split and the
    /// residual-based standard error.
    pub uncertainty: f64,
}

/// Least-squares power law y = a t^b in log-log space over `points`
/// (t, y), optionally restricted to a window in t.
pub fn fit_power_law(
    points: &[(f64, f64)],
    window: Option<(f64, f64)>,
) -> Result<PowerLawFit, AnalysisError> {
    let filtered: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, _)| window.map_or(true, |(lo, hi)| *t >= lo && *t <= hi))
        .copied()
        .collect();
    if filtered.len() < 4 {
        return Err(AnalysisError::TooFewPoints { need: 4, got: filtered.len() });
    }
    if filtered.iter().any(|&(t, y)| t <= 0.0 || y <= 0.0) {
        return Err(AnalysisError::InvalidPoints("power-law fit needs t > 0 and y > 0".into()));
    }
    let t_min = filtered.iter().map(|(t, _)| *t).fold(f64::INFINITY, f64::min);
    let t_max = filtered.iter().map(|(t, _)| *t).fold(0.0f64, f64::max);
    let decades = (t_max / t_min).log10();
    if decades < 0.5 {
        return Err(AnalysisError::WindowTooNarrow { decades, need: 0.5 });
    }
    let logs: Vec<(f64, f64)> = filtered.iter().map(|&(t, y)| (t.ln(), y.ln())).collect();
    let (slope, intercept) = linear_fit(&logs);
    let residual = (logs
        .iter()
        .map(|&(x, y)| (y - slope * x - intercept).powi(2))
        .sum::<f64>()
        / logs.len() as f64)
        .sqrt();

    // Two-subgroup split for the statistical error; fall back to the
    // residual-based standard error when the curve fluctuation dominates.
    let even: Vec<(f64, f64)> = logs.iter().copied().step_by(2).collect();
    let odd: Vec<(f64, f64)> = logs.iter().copied().skip(1).step_by(2).collect();
    let split = if even.len() >= 2 && odd.len() >= 2 {
        let (s1, _) = linear_fit(&even);
        let (s2, _) = linear_fit(&odd);
        (s1 - s2).abs() / 2.0
    } else {
        0.0
    };
    let x_mean = logs.iter().map(|(x, _)| x).sum::<f64>() / logs.len() as f64;
    let sxx: f64 = logs.iter().map(|(x, _)| (x - x_mean).powi(2)).sum();
    let stderr = if sxx > 0.0 { residual / sxx.sqrt() } else { 0.0 };

    Ok(PowerLawFit {
        exponent: slope,
        prefactor: intercept.exp(),
        residual,
        uncertainty: split.max(stderr).max(1e-12),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransitionEstimator {
    ParityJump,
    PowerlawFit,
    EntropyCusp,
    QfmaxPeak,
    VariancePeak,
}

impl TransitionEstimator {
    pub fn as_str(&self) -> &'static str {
        match self {
            TransitionEstimator::ParityJump => "parity-jump",
            TransitionEstimator::PowerlawFit => "powerlaw-fit",
            TransitionEstimator::EntropyCusp => "entropy-cusp",
            TransitionEstimator::QfmaxPeak => "qfmax-peak",
            TransitionEstimator::VariancePeak => "variance-peak",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalFit {
    pub alpha_c: f64,
    pub uncertainty: f64,
    pub estimator: TransitionEstimator,
    /// Alpha range examined.
    pub window: (f64, f64),
    pub residual: f64,
    /// Order-parameter exponent, set by the power-law estimator.
    pub beta: Option<PowerLawFit>,
}

fn check_sweep(sweep: &[&GroundStateRecord]) -> Result<(), AnalysisError> {
    if sweep.len() < 2 {
        return Err(AnalysisError::TooFewPoints { need: 2, got: sweep.len() });
    }
    for pair in sweep.windows(2) {
        if pair[1].spec.alpha <= pair[0].spec.alpha {
            return Err(AnalysisError::BadSweep);
        }
    }
    if sweep.iter().any(|r| !r.converged) {
        return Err(AnalysisError::BadSweep);
    }
    Ok(())
}

/// Dominant order parameter of a record: |sigma_z| unless the sweep
/// localizes in sigma_y (off-diagonal coupling).
fn order_parameter(record: &GroundStateRecord) -> f64 {
    record.observables.sigma_z.abs().max(record.observables.sigma_y.abs())
}

fn peak_location(
    alphas: &[f64],
    values: &[f64],
    name: &str,
) -> Result<(f64, f64), AnalysisError> {
    let mut best = 0usize;
    for i in 1..values.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    if best == 0 || best + 1 == values.len() {
        return Err(AnalysisError::NoTransition(name.into()));
    }
    // Parabolic refinement through the three points around the maximum.
    let (x0, x1, x2) = (alphas[best - 1], alphas[best], alphas[best + 1]);
    let (y0, y1, y2) = (values[best - 1], values[best], values[best + 1]);
    let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
    let refined = if denom.abs() > 1e-300 {
        let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
        let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
        if a < 0.0 {
            let vertex = -b / (2.0 * a);
            if vertex >= x0 && vertex <= x2 {
                vertex
            } else {
                x1
            }
        } else {
            x1
        }
    } else {
        x1
    };
    let spacing = 0.5 * (x2 - x0) / 2.0;
    Ok((refined, spacing))
}

/// Locate the transition point in a certified, alpha-sorted sweep.
pub fn locate_transition(
    sweep: &[&GroundStateRecord],
    estimator: TransitionEstimator,
) -> Result<CriticalFit, AnalysisError> {
    check_sweep(sweep)?;
    let alphas: Vec<f64> = sweep.iter().map(|r| r.spec.alpha).collect();
    let window = (alphas[0], *alphas.last().unwrap());

    match estimator {
        TransitionEstimator::ParityJump => {
            for i in 0..sweep.len() - 1 {
                let here = sweep[i].observables.parity.abs();
                let next = sweep[i + 1].observables.parity.abs();
                if here > 0.5 && next < 0.5 {
                    return Ok(CriticalFit {
                        alpha_c: 0.5 * (alphas[i] + alphas[i + 1]),
                        uncertainty: 0.5 * (alphas[i + 1] - alphas[i]),
                        estimator,
                        window,
                        residual: 0.0,
                        beta: None,
                    });
                }
            }
            Err(AnalysisError::NoTransition("parity-jump".into()))
        }
        TransitionEstimator::PowerlawFit => {
            let ops: Vec<f64> = sweep.iter().map(|r| order_parameter(r)).collect();
            let op_max = max_abs(&ops);
            if op_max < 1e-6 {
                return Err(AnalysisError::NoTransition("powerlaw-fit".into()));
            }
            // Bracket the onset between the last quiet point and the first
            // clearly ordered point.
            let mut lo = alphas[0];
            let mut hi = *alphas.last().unwrap();
            for i in 0..sweep.len() {
                if ops[i] < 0.05 * op_max {
                    lo = alphas[i];
                } else {
                    hi = alphas[i];
                    break;
                }
            }
            if hi <= lo {
                hi = lo + (alphas[1] - alphas[0]).abs();
            }
            let scan = |subset: &dyn Fn(usize) -> bool| -> Option<(f64, f64, f64)> {
                let mut best: Option<(f64, f64, f64)> = None;
                let steps = 60;
                for step in 0..=steps {
                    let cand = lo + (hi - lo) * step as f64 / steps as f64;
                    let pts: Vec<(f64, f64)> = sweep
                        .iter()
                        .enumerate()
                        .filter(|(i, r)| {
                            subset(*i) && r.spec.alpha > cand && ops[*i] > 1e-8
                        })
                        .map(|(i, r)| (r.spec.alpha - cand, ops[i]))
                        .collect();
                    if let Ok(fit) = fit_power_law(&pts, None) {
                        let better = best.map_or(true, |(_, _, res)| fit.residual < res);
                        if better {
                            best = Some((cand, fit.exponent, fit.residual));
                        }
                    }
                }
                best
            };
            let full = scan(&|_| true)
                .ok_or_else(|| AnalysisError::NoTransition("powerlaw-fit".into()))?;
            let g1 = scan(&|i| i % 2 == 0);
            let g2 = scan(&|i| i % 2 == 1);
            let split = match (g1, g2) {
                (Some(a), Some(b)) => (a.0 - b.0).abs() / 2.0,
                _ => 0.0,
            };
            let grid = (hi - lo) / 60.0;
            let alpha_c = full.0;
            let pts: Vec<(f64, f64)> = sweep
                .iter()
                .enumerate()
                .filter(|(i, r)| r.spec.alpha > alpha_c && ops[*i] > 1e-8)
                .map(|(i, r)| (r.spec.alpha - alpha_c, ops[i]))
                .collect();
            let beta = fit_power_law(&pts, None).ok();
            Ok(CriticalFit {
                alpha_c,
                uncertainty: split.max(grid).max(1e-12),
                estimator,
                window,
                residual: full.2,
                beta,
            })
        }
        TransitionEstimator::EntropyCusp
        | TransitionEstimator::QfmaxPeak
        | TransitionEstimator::VariancePeak => {
            let values: Vec<f64> = sweep
                .iter()
                .map(|r| match estimator {
                    TransitionEstimator::EntropyCusp => r.observables.entropy,
                    TransitionEstimator::QfmaxPeak => r.observables.qf_max,
                    _ => r.energy_variance,
                })
                .collect();
            let (alpha_c, unc) = peak_location(&alphas, &values, estimator.as_str())?;
            Ok(CriticalFit {
                alpha_c,
                uncertainty: unc,
                estimator,
                window,
                residual: 0.0,
                beta: None,
            })
        }
    }
}

/// Entropy-vs-log-distance fit on the localized side: S = b - C ln(a - a_c)
/// with C = A nu c / 6; the central charge is reported under A = 1 and the
/// mean-field nu = 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CftFit {
    /// Slope coefficient A nu c / 6.
    pub slope_coeff: f64,
    /// Central charge under A = 1, nu = 1/2.
    pub central_charge: f64,
    /// Non-universal constants of the linear form.
    pub k_const: f64,
    pub b_const: f64,
    pub residual: f64,
    pub points_used: usize,
}

pub fn fit_entropy_cft(
    sweep: &[&GroundStateRecord],
    alpha_c: f64,
) -> Result<CftFit, AnalysisError> {
    let pts: Vec<(f64, f64)> = sweep
        .iter()
        .filter(|r| r.spec.alpha > alpha_c && r.observables.entropy > 1e-9)
        .map(|r| (r.spec.alpha - alpha_c, r.observables.entropy))
        .collect();
    if pts.len() < 4 {
        return Err(AnalysisError::TooFewPoints { need: 4, got: pts.len() });
    }
    let t_min = pts.iter().map(|(t, _)| *t).fold(f64::INFINITY, f64::min);
    let t_max = pts.iter().map(|(t, _)| *t).fold(0.0f64, f64::max);
    let decades = (t_max / t_min).log10();
    if decades < 1.0 {
        return Err(AnalysisError::WindowTooNarrow { decades, need: 1.0 });
    }
    let logs: Vec<(f64, f64)> = pts.iter().map(|&(t, s)| (t.ln(), s)).collect();
    let (slope, intercept) = linear_fit(&logs);
    let residual = (logs
        .iter()
        .map(|&(x, y)| (y - slope * x - intercept).powi(2))
        .sum::<f64>()
        / logs.len() as f64)
        .sqrt();
    let slope_coeff = -slope;
    let central_charge = 12.0 * slope_coeff;
    let k_const = if central_charge.abs() > 1e-12 {
        (6.0 * intercept / central_charge).exp()
    } else {
        f64::NAN
    };
    Ok(CftFit {
        slope_coeff,
        central_charge,
        k_const,
        b_const: intercept,
        residual,
        points_used: pts.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplacementFit {
    /// Infrared regularization scale of the optimal displacement profile
    /// sign * lambda_k / (omega_k + chi).
    pub chi: f64,
    pub sign: f64,
    /// RMS residual over modes.
    pub residual: f64,
    /// Largest per-mode residual.
    pub max_residual: f64,
}

/// One-parameter least squares of an averaged displacement profile against
/// sign * lambda_k / (omega_k + chi).
pub fn fit_displacement(
    displacements: &[f64],
    bath: &DiscretizedBath,
) -> Result<DisplacementFit, AnalysisError> {
    assert_eq!(displacements.len(), bath.num_modes());
    let scale = max_abs(displacements);
    if scale < 1e-10 {
        return Err(AnalysisError::NotApplicable(
            "displacements vanish (free phase)".into(),
        ));
    }
    let ssr = |chi: f64, sign: f64| -> f64 {
        displacements
            .iter()
            .enumerate()
            .map(|(k, &d)| {
                let model = sign * bath.lambda[k] / (bath.omega[k] + chi);
                (d - model).powi(2)
            })
            .sum()
    };
    let mut best = (f64::INFINITY, 0.0, 1.0);
    for sign in [1.0, -1.0] {
        // Golden-section search in log(chi).
        let (mut lo, mut hi) = ((1e-10f64).ln(), (10.0f64).ln());
        let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
        let mut c = hi - inv_phi * (hi - lo);
        let mut d = lo + inv_phi * (hi - lo);
        let (mut fc, mut fd) = (ssr(c.exp(), sign), ssr(d.exp(), sign));
        for _ in 0..200 {
            if fc < fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - inv_phi * (hi - lo);
                fc = ssr(c.exp(), sign);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + inv_phi * (hi - lo);
                fd = ssr(d.exp(), sign);
            }
        }
        let chi = (0.5 * (lo + hi)).exp();
        let value = ssr(chi, sign);
        if value < best.0 {
            best = (value, chi, sign);
        }
    }
    let (ssr_min, chi, sign) = best;
    let residual = (ssr_min / displacements.len() as f64).sqrt();
    let max_residual = displacements
        .iter()
        .enumerate()
        .map(|(k, &d)| (d - sign * bath.lambda[k] / (bath.omega[k] + chi)).abs())
        .fold(0.0f64, f64::max);
    Ok(DisplacementFit { chi, sign, residual, max_residual })
}

/// One grid point of a phase map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub delta: f64,
    pub alpha: f64,
    pub label: PhaseLabel,
}

/// One boundary bracket along a fixed-delta row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub delta: f64,
    pub alpha_c: f64,
    pub uncertainty: f64,
    pub from: PhaseLabel,
    pub to: PhaseLabel,
}

/// Boundary bracket along a fixed-alpha column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaBoundaryPoint {
    pub alpha: f64,
    pub delta_c: f64,
    pub uncertainty: f64,
    pub from: PhaseLabel,
    pub to: PhaseLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMap {
    pub points: Vec<PhasePoint>,
    /// Grid points that failed to produce a certified record.
    pub holes: Vec<(f64, f64)>,
    pub boundaries: Vec<BoundaryPoint>,
    pub delta_boundaries: Vec<DeltaBoundaryPoint>,
    /// Largest tunneling on the localized-delocalized boundary, from a
    /// third-order polynomial fit (value, uncertainty).
    pub delta_star: Option<(f64, f64)>,
}

/// Input row for the phase map: records (or holes) over alpha at fixed delta.
pub struct PhaseRow {
    pub delta: f64,
    pub points: Vec<(f64, Option<GroundStateRecord>)>,
}

fn cubic_max(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 4 {
        return None;
    }
    let coeffs = polyfit(points, 3);
    let lo = points.iter().map(|(x, _)| *x).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|(x, _)| *x).fold(f64::NEG_INFINITY, f64::max);
    let mut best = f64::NEG_INFINITY;
    for step in 0..=1000 {
        let x = lo + (hi - lo) * step as f64 / 1000.0;
        let y = coeffs[0] + coeffs[1] * x + coeffs[2] * x * x + coeffs[3] * x * x * x;
        best = best.max(y);
    }
    Some(best)
}

/// Assemble the phase map from classified rows: per-point labels, boundary
/// brackets from label changes along rows and columns, and the maximal
/// tunneling of the localized-delocalized boundary via a cubic fit.
pub fn build_phase_map(rows: &[PhaseRow], tol: &ClassifyTolerances) -> PhaseMap {
    let mut points = Vec::new();
    let mut holes = Vec::new();
    let mut boundaries = Vec::new();
    let mut labeled: Vec<(f64, Vec<(f64, PhaseLabel)>)> = Vec::new();

    for row in rows {
        let mut row_labels = Vec::new();
        for (alpha, record) in &row.points {
            match record {
                Some(r) if r.converged => {
                    let label = classify_phase(r, tol);
                    points.push(PhasePoint { delta: row.delta, alpha: *alpha, label });
                    row_labels.push((*alpha, label));
                }
                _ => holes.push((row.delta, *alpha)),
            }
        }
        for pair in row_labels.windows(2) {
            let (a0, l0) = pair[0];
            let (a1, l1) = pair[1];
            if l0 != l1 && l0 != PhaseLabel::Unclassified && l1 != PhaseLabel::Unclassified {
                boundaries.push(BoundaryPoint {
                    delta: row.delta,
                    alpha_c: 0.5 * (a0 + a1),
                    uncertainty: 0.5 * (a1 - a0),
                    from: l0,
                    to: l1,
                });
            }
        }
        labeled.push((row.delta, row_labels));
    }

    // Column-wise boundaries in delta at matching alpha values.
    let mut delta_boundaries = Vec::new();
    let mut alphas: Vec<f64> = labeled
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|(a, _)| *a))
        .collect();
    alphas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    alphas.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    for &alpha in &alphas {
        let mut column: Vec<(f64, PhaseLabel)> = labeled
            .iter()
            .filter_map(|(delta, pts)| {
                pts.iter()
                    .find(|(a, _)| (a - alpha).abs() < 1e-12)
                    .map(|(_, l)| (*delta, *l))
            })
            .collect();
        column.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for pair in column.windows(2) {
            let (d0, l0) = pair[0];
            let (d1, l1) = pair[1];
            if l0 != l1 && l0 != PhaseLabel::Unclassified && l1 != PhaseLabel::Unclassified {
                delta_boundaries.push(DeltaBoundaryPoint {
                    alpha,
                    delta_c: 0.5 * (d0 + d1),
                    uncertainty: 0.5 * (d1 - d0),
                    from: l0,
                    to: l1,
                });
            }
        }
    }

    // Maximal tunneling of the localized-delocalized boundary.
    let loc_deloc: Vec<(f64, f64)> = boundaries
        .iter()
        .filter(|b| {
            (b.from.is_localized() && b.to.is_delocalized())
                || (b.from.is_delocalized() && b.to.is_localized())
        })
        .map(|b| (b.alpha_c, b.delta))
        .collect();
    let delta_star = cubic_max(&loc_deloc).map(|value| {
        let even: Vec<(f64, f64)> = loc_deloc.iter().copied().step_by(2).collect();
        let odd: Vec<(f64, f64)> = loc_deloc.iter().copied().skip(1).step_by(2).collect();
        let unc = match (cubic_max(&even), cubic_max(&odd)) {
            (Some(a), Some(b)) => ((a - b).abs() / 2.0).max(1e-6),
            _ => f64::NAN,
        };
        (value, unc)
    });

    PhaseMap { points, holes, boundaries, delta_boundaries, delta_star }
}

/// Critical coupling with uncertainty at one tunneling value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaC {
    pub delta: f64,
    pub alpha_c: f64,
    pub uncertainty: f64,
}

/// Pair RW and CRW boundary estimates through delta -> -delta and report
/// (delta, |difference|, combined uncertainty) for each matched pair.
pub fn mirror_symmetry_check(rw: &[AlphaC], crw: &[AlphaC]) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    for a in rw {
        if let Some(b) = crw.iter().find(|b| (b.delta + a.delta).abs() < 1e-9) {
            out.push((
                a.delta,
                (a.alpha_c - b.alpha_c).abs(),
                (a.uncertainty.powi(2) + b.uncertainty.powi(2)).sqrt(),
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::VariationalState;
    use crate::bath::{discretize_bath, CouplingCase, ModelSpec};
    use crate::observables::ObservableSet;
    use crate::solver::{GroundStateRecord, SolverConfig, SCHEMA_VERSION};
    use num_complex::Complex64 as C64;

    fn test_spec(alpha: f64) -> ModelSpec {
        ModelSpec {
            s: 0.3,
            alpha,
            delta: 0.05,
            epsilon: 0.0,
            omega_c: 1.0,
            lambda_grid: 2.0,
            num_modes: 2,
            coupling: CouplingCase::Diagonal,
        }
    }

    fn blank_observables(m: usize) -> ObservableSet {
        ObservableSet {
            sigma_x: 1.0,
            sigma_y: 0.0,
            sigma_z: 0.0,
            entropy: 0.0,
            n_ex: 0.0,
            parity: 1.0,
            rho_uu: 0.5,
            rho_dd: 0.5,
            rho_ud: C64::new(0.5, 0.0),
            qf: vec![0.0; m],
            qf_max: 0.0,
            qf_max_omega: 1.0,
            x_mean: vec![0.0; m],
            p_mean: vec![0.0; m],
            var_x: vec![0.5; m],
            var_p: vec![0.5; m],
            a_bar: std::f64::consts::FRAC_1_SQRT_2,
            b_bar: std::f64::consts::FRAC_1_SQRT_2,
            b_bar_sign_defined: true,
            f_bar: vec![0.0; m],
            g_bar: vec![0.0; m],
        }
    }

    fn fake_record(alpha: f64, obs: ObservableSet) -> GroundStateRecord {
        GroundStateRecord {
            schema_version: SCHEMA_VERSION,
            spec: test_spec(alpha),
            solver: SolverConfig::default(),
            spec_fingerprint: String::new(),
            bath_fingerprint: String::new(),
            energy: -0.025,
            energy_variance: 1e-9,
            observables: obs,
            state: VariationalState::free_state(1, 2),
            converged: true,
            sweeps: 1000,
            winner_restart: 0,
            converged_restarts: 1,
            degenerate_partner: false,
            partner_energy: None,
            frozen_updates: 0,
            stationarity_residual: 1e-9,
            wall_time_s: 0.0,
        }
    }

    #[test]
    fn power_law_exact_recovery() {
        let pts: Vec<(f64, f64)> =
            (1..=12).map(|i| {
                let t = 1e-3 * 1.6f64.powi(i);
                (t, 3.0 * t.sqrt())
            }).collect();
        let fit = fit_power_law(&pts, None).unwrap();
        assert!((fit.exponent - 0.5).abs() < 1e-10);
        assert!((fit.prefactor - 3.0).abs() < 1e-9);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn power_law_rejects_narrow_window() {
        let pts: Vec<(f64, f64)> =
            (0..10).map(|i| (1.0 + i as f64 * 0.1, 2.0 + i as f64 * 0.05)).collect();
        assert!(matches!(
            fit_power_law(&pts, None),
            Err(AnalysisError::WindowTooNarrow { .. })
        ));
        assert!(matches!(
            fit_power_law(&pts[..3], None),
            Err(AnalysisError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn parity_jump_bracket_midpoint() {
        let mut records = Vec::new();
        for i in 0..10 {
            let alpha = 0.01 + 0.002 * i as f64;
            let mut obs = blank_observables(2);
            obs.parity = if alpha < 0.0195 { 1.0 } else { 0.02 };
            records.push(fake_record(alpha, obs));
        }
        let refs: Vec<&GroundStateRecord> = records.iter().collect();
        let fit = locate_transition(&refs, TransitionEstimator::ParityJump).unwrap();
        assert!((fit.alpha_c - 0.019).abs() < 1e-12);
        assert!((fit.uncertainty - 0.001).abs() < 1e-12);
    }

    #[test]
    fn peak_estimators_with_parabolic_refinement() {
        let true_peak = 0.0213;
        let mut records = Vec::new();
        for i in 0..15 {
            let alpha = 0.015 + 0.001 * i as f64;
            let mut obs = blank_observables(2);
            obs.entropy = 0.8 - 40.0 * (alpha - true_peak).powi(2);
            obs.qf_max = obs.entropy;
            records.push(fake_record(alpha, obs));
        }
        let refs: Vec<&GroundStateRecord> = records.iter().collect();
        for est in [TransitionEstimator::EntropyCusp, TransitionEstimator::QfmaxPeak] {
            let fit = locate_transition(&refs, est).unwrap();
            assert!((fit.alpha_c - true_peak).abs() < 1e-6, "{est:?}: {}", fit.alpha_c);
        }
    }

    #[test]
    fn variance_peak_uses_record_variance() {
        let true_peak = 0.0208;
        let mut records = Vec::new();
        for i in 0..12 {
            let alpha = 0.017 + 0.0008 * i as f64;
            let mut rec = fake_record(alpha, blank_observables(2));
            rec.energy_variance = 1e-7 * (1.0 - 2000.0 * (alpha - true_peak).powi(2));
            records.push(rec);
        }
        let refs: Vec<&GroundStateRecord> = records.iter().collect();
        let fit = locate_transition(&refs, TransitionEstimator::VariancePeak).unwrap();
        assert!((fit.alpha_c - true_peak).abs() < 1e-5);
    }

    #[test]
    fn powerlaw_estimator_finds_onset_and_exponent() {
        let alpha_c = 0.0205;
        let mut records = Vec::new();
        for i in 0..26 {
            let alpha = 0.015 + 0.0008 * i as f64;
            let mut obs = blank_observables(2);
            if alpha > alpha_c {
                obs.sigma_z = 1.4 * (alpha - alpha_c).powf(0.5);
                obs.parity = 0.0;
            }
            records.push(fake_record(alpha, obs));
        }
        let refs: Vec<&GroundStateRecord> = records.iter().collect();
        let fit = locate_transition(&refs, TransitionEstimator::PowerlawFit).unwrap();
        assert!((fit.alpha_c - alpha_c).abs() < 3e-4, "alpha_c = {}", fit.alpha_c);
        let beta = fit.beta.unwrap();
        assert!((beta.exponent - 0.5).abs() < 0.05, "beta = {}", beta.exponent);
    }

    #[test]
    fn no_transition_reported_when_flat() {
        let records: Vec<GroundStateRecord> = (0..8)
            .map(|i| fake_record(0.01 + 0.001 * i as f64, blank_observables(2)))
            .collect();
        let refs: Vec<&GroundStateRecord> = records.iter().collect();
        assert!(matches!(
            locate_transition(&refs, TransitionEstimator::ParityJump),
            Err(AnalysisError::NoTransition(_))
        ));
    }

    #[test]
    fn entropy_cft_fit_recovers_slope() {
        let alpha_c = 0.02;
        let mut records = Vec::new();
        for i in 1..=20 {
            let tau = 1e-4 * 1.5f64.powi(i);
            let mut obs = blank_observables(2);
            obs.entropy = 0.5 - 0.1 * tau.ln();
            records.push(fake_record(alpha_c + tau, obs));
        }
        let refs: Vec<&GroundStateRecord> = records.iter().collect();
        let fit = fit_entropy_cft(&refs, alpha_c).unwrap();
        assert!((fit.slope_coeff - 0.1).abs() < 1e-10);
        assert!((fit.central_charge - 1.2).abs() < 1e-9);
        assert!((fit.b_const - 0.5).abs() < 1e-10);
    }

    #[test]
    fn entropy_cft_needs_a_decade() {
        let alpha_c = 0.02;
        let records: Vec<GroundStateRecord> = (1..=6)
            .map(|i| {
                let mut obs = blank_observables(2);
                obs.entropy = 0.4;
                fake_record(alpha_c + 1e-3 + 1e-4 * i as f64, obs)
            })
            .collect();
        let refs: Vec<&GroundStateRecord> = records.iter().collect();
        assert!(matches!(
            fit_entropy_cft(&refs, alpha_c),
            Err(AnalysisError::WindowTooNarrow { .. })
        ));
    }

    #[test]
    fn displacement_fit_exact_and_not_applicable() {
        let spec = test_spec(0.05);
        let mut spec_m = spec.clone();
        spec_m.num_modes = 30;
        spec_m.lambda_grid = 1.3;
        let bath = discretize_bath(&spec_m).unwrap();
        let chi_true = 0.01;
        let disp: Vec<f64> =
            (0..30).map(|k| bath.lambda[k] / (bath.omega[k] + chi_true)).collect();
        let fit = fit_displacement(&disp, &bath).unwrap();
        assert!((fit.chi - chi_true).abs() < 1e-7, "chi = {}", fit.chi);
        assert!(fit.sign > 0.0);
        assert!(fit.residual < 1e-10);

        let neg: Vec<f64> = disp.iter().map(|d| -d).collect();
        let fit = fit_displacement(&neg, &bath).unwrap();
        assert!(fit.sign < 0.0);

        let zeros = vec![0.0; 30];
        assert!(matches!(
            fit_displacement(&zeros, &bath),
            Err(AnalysisError::NotApplicable(_))
        ));
    }

    #[test]
    fn classification_rules() {
        let spec = test_spec(0.05);
        let bath = discretize_bath(&spec).unwrap();
        let tol = ClassifyTolerances::for_bath(&bath);

        let free = fake_record(0.01, blank_observables(2));
        assert_eq!(classify_phase(&free, &tol), PhaseLabel::Free);

        let mut even = blank_observables(2);
        even.n_ex = 0.3;
        even.f_bar = vec![-0.4, -0.2];
        even.g_bar = vec![0.4, 0.2];
        let even = fake_record(0.015, even);
        assert_eq!(classify_phase(&even, &tol), PhaseLabel::EvenDelocalized);

        let mut odd = blank_observables(2);
        odd.n_ex = 0.3;
        odd.parity = -1.0;
        odd.sigma_x = -0.9;
        odd.b_bar = -std::f64::consts::FRAC_1_SQRT_2;
        odd.f_bar = vec![-0.4, -0.2];
        odd.g_bar = vec![0.4, 0.2];
        let odd = fake_record(0.015, odd);
        assert_eq!(classify_phase(&odd, &tol), PhaseLabel::OddDelocalized);

        let mut loc = blank_observables(2);
        loc.n_ex = 2.0;
        loc.parity = 0.01;
        loc.sigma_x = 0.4;
        loc.sigma_z = 0.8;
        loc.f_bar = vec![-3.0, -1.0];
        loc.g_bar = vec![-3.0, -1.0];
        let mut loc = fake_record(0.05, loc);
        loc.degenerate_partner = true;
        assert_eq!(classify_phase(&loc, &tol), PhaseLabel::LocalizedII);
        loc.observables.sigma_x = -0.4;
        assert_eq!(classify_phase(&loc, &tol), PhaseLabel::LocalizedIV);
        // Without a degenerate partner no localized rule fires.
        loc.degenerate_partner = false;
        assert_eq!(classify_phase(&loc, &tol), PhaseLabel::Unclassified);
    }

    #[test]
    fn phase_map_boundaries_and_holes() {
        let spec = test_spec(0.05);
        let bath = discretize_bath(&spec).unwrap();
        let tol = ClassifyTolerances::for_bath(&bath);
        let make_row = |delta: f64, alpha_c: f64| -> PhaseRow {
            let points = (0..8)
                .map(|i| {
                    let alpha = 0.005 * (i + 1) as f64;
                    if (alpha - 0.02).abs() < 1e-12 && delta > 0.07 {
                        return (alpha, None); // hole
                    }
                    let mut obs = blank_observables(2);
                    let mut partner = false;
                    if alpha > alpha_c {
                        obs.parity = 0.0;
                        obs.sigma_x = 0.3;
                        obs.sigma_z = 0.7;
                        obs.n_ex = 1.0;
                        obs.f_bar = vec![-2.0, -1.0];
                        obs.g_bar = vec![-2.0, -1.0];
                        partner = true;
                    }
                    let mut rec = fake_record(alpha, obs);
                    rec.spec.delta = delta;
                    rec.degenerate_partner = partner;
                    (alpha, Some(rec))
                })
                .collect();
            PhaseRow { delta, points }
        };
        let rows =
            vec![make_row(0.05, 0.021), make_row(0.08, 0.027), make_row(0.1, 0.033)];
        let map = build_phase_map(&rows, &tol);
        assert_eq!(map.holes.len(), 2);
        assert!(map.boundaries.iter().any(|b| (b.delta - 0.05).abs() < 1e-12
            && (b.alpha_c - 0.0225).abs() < 1e-9));
        // Free-to-localized boundaries at three deltas; label changes along
        // columns give delta boundaries too.
        assert_eq!(map.boundaries.len(), 3);
        assert!(!map.delta_boundaries.is_empty());
    }

    #[test]
    fn mirror_check_pairs_by_negated_delta() {
        let rw = vec![AlphaC { delta: 0.05, alpha_c: 0.021, uncertainty: 0.001 }];
        let crw = vec![AlphaC { delta: -0.05, alpha_c: 0.0215, uncertainty: 0.001 }];
        let diffs = mirror_symmetry_check(&rw, &crw);
        assert_eq!(diffs.len(), 1);
        assert!((diffs[0].1 - 0.0005).abs() < 1e-12);
    }
}
