//! Sub-Ohmic bath discretization and coupling coefficients.
//!
//! The continuous spectral density J(w) = 2 a wc^(1-s) w^s on (0, wc] is
//! coarse-grained on a logarithmic Wilson mesh: the domain is split into M
//! intervals [L^(k-M), L^(k+1-M)] wc and each interval is replaced by a
//! single effective mode. The squared coupling of mode k carries the full
//! spectral weight of its interval and the mode frequency is the
//! J-weighted mean frequency, so the zeroth and first moments of J are
//! preserved exactly on the discretized support.
//!
//! Power-law J admits closed-form moment integrals, which are used instead
//! of quadrature so the tables are reproducible bit-for-bit.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BathError {
    #[error("invalid model: {0}")]
    InvalidSpec(String),
    #[error("rotation requires off-diagonal coupling, got {0}")]
    NotOffDiagonal(String),
    #[error("rotation is derived at zero energy bias, got epsilon = {0}")]
    NonzeroBias(f64),
}

/// System-bath interaction type. The named cases fix the per-mode split of
/// the total coupling eta_k between the rotating-wave channel (lambda_k)
/// and the counter-rotating channel (gamma_k); `General` admits any split
/// with |w_lambda| + |w_gamma| = 1 for interpolation studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingCase {
    /// lambda = gamma = eta/2: pure sigma_z (position) coupling.
    Diagonal,
    /// lambda = -gamma = eta/2: pure sigma_y (momentum) coupling.
    OffDiagonal,
    /// lambda = eta, gamma = 0: excitation-conserving coupling.
    RotatingWave,
    /// lambda = 0, gamma = eta.
    CounterRotatingWave,
    General { w_lambda: f64, w_gamma: f64 },
}

impl CouplingCase {
    /// Per-mode weights (w_lambda, w_gamma) with lambda_k = w_lambda * eta_k.
    pub fn weights(&self) -> (f64, f64) {
        match *self {
            CouplingCase::Diagonal => (0.5, 0.5),
            CouplingCase::OffDiagonal => (0.5, -0.5),
            CouplingCase::RotatingWave => (1.0, 0.0),
            CouplingCase::CounterRotatingWave => (0.0, 1.0),
            CouplingCase::General { w_lambda, w_gamma } => (w_lambda, w_gamma),
        }
    }

    pub fn name(&self) -> String {
        match self {
            CouplingCase::Diagonal => "diagonal".into(),
            CouplingCase::OffDiagonal => "offdiagonal".into(),
            CouplingCase::RotatingWave => "rw".into(),
            CouplingCase::CounterRotatingWave => "crw".into(),
            CouplingCase::General { w_lambda, w_gamma } => {
                format!("general({w_lambda},{w_gamma})")
            }
        }
    }
}

/// Physical parameters of one ASBM instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Spectral exponent, sub-Ohmic: 0 < s < 1.
    pub s: f64,
    /// Dimensionless coupling constant, >= 0.
    pub alpha: f64,
    /// Tunneling amplitude (may be negative).
    pub delta: f64,
    /// Energy bias.
    pub epsilon: f64,
    /// High-frequency cutoff; energies are reported in these units.
    pub omega_c: f64,
    /// Logarithmic discretization factor, > 1.
    pub lambda_grid: f64,
    /// Number of effective bath modes.
    pub num_modes: usize,
    pub coupling: CouplingCase,
}

impl ModelSpec {
    /// Canonical settings used throughout: s = 0.3, Lambda = 1.05, M = 430,
    /// epsilon = 0, omega_c = 1.
    pub fn canonical(coupling: CouplingCase, delta: f64, alpha: f64) -> Self {
        ModelSpec {
            s: 0.3,
            alpha,
            delta,
            epsilon: 0.0,
            omega_c: 1.0,
            lambda_grid: 1.05,
            num_modes: 430,
            coupling,
        }
    }

    pub fn validate(&self) -> Result<(), BathError> {
        let fail = |msg: String| Err(BathError::InvalidSpec(msg));
        if !(self.s > 0.0 && self.s < 1.0) {
            return fail(format!("spectral exponent s must lie in (0,1), got {}", self.s));
        }
        if !(self.alpha >= 0.0) {
            return fail(format!("coupling alpha must be >= 0, got {}", self.alpha));
        }
        if !(self.lambda_grid > 1.0) {
            return fail(format!(
                "discretization factor Lambda must be > 1, got {}",
                self.lambda_grid
            ));
        }
        if self.num_modes == 0 {
            return fail("number of modes M must be >= 1".into());
        }
        if !(self.omega_c > 0.0) {
            return fail(format!("cutoff omega_c must be > 0, got {}", self.omega_c));
        }
        if !self.delta.is_finite() || !self.epsilon.is_finite() {
            return fail("delta and epsilon must be finite".into());
        }
        if let CouplingCase::General { w_lambda, w_gamma } = self.coupling {
            if ((w_lambda.abs() + w_gamma.abs()) - 1.0).abs() > 1e-12 {
                return fail(format!(
                    "general coupling weights must satisfy |w_lambda|+|w_gamma| = 1, \
                     got {w_lambda} and {w_gamma}"
                ));
            }
        }
        Ok(())
    }

    /// Spectral density J(w) = 2 alpha omega_c^(1-s) w^s on (0, omega_c].
    pub fn spectral_density(&self, omega: f64) -> f64 {
        if omega <= 0.0 || omega > self.omega_c {
            0.0
        } else {
            2.0 * self.alpha * self.omega_c.powf(1.0 - self.s) * omega.powf(self.s)
        }
    }

    pub fn fingerprint(&self) -> String {
        let mut text = String::new();
        let _ = write!(
            text,
            "s={:.17e};alpha={:.17e};delta={:.17e};epsilon={:.17e};omega_c={:.17e};\
             lambda={:.17e};modes={};case={}",
            self.s,
            self.alpha,
            self.delta,
            self.epsilon,
            self.omega_c,
            self.lambda_grid,
            self.num_modes,
            self.coupling.name()
        );
        format!("{:016x}", crate::fnv1a64(&text))
    }
}

/// Discretized bath tables: one entry per effective mode, frequencies
/// strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedBath {
    /// Mode frequencies omega_k.
    pub omega: Vec<f64>,
    /// Total couplings eta_k >= 0.
    pub eta: Vec<f64>,
    /// Rotating-wave couplings lambda_k.
    pub lambda: Vec<f64>,
    /// Counter-rotating couplings gamma_k.
    pub gamma: Vec<f64>,
    /// (lambda_k + gamma_k)/2, the sigma_z channel strength.
    pub half_sum: Vec<f64>,
    /// (gamma_k - lambda_k)/2, the i*sigma_y channel strength.
    pub half_diff: Vec<f64>,
}

impl DiscretizedBath {
    pub fn num_modes(&self) -> usize {
        self.omega.len()
    }

    /// Lowest retained frequency; spectral weight below it is dropped.
    pub fn omega_min(&self) -> f64 {
        self.omega[0]
    }

    pub fn fingerprint(&self) -> String {
        let mut text = String::new();
        for k in 0..self.num_modes() {
            let _ = write!(
                text,
                "{:.17e},{:.17e},{:.17e},{:.17e};",
                self.omega[k], self.eta[k], self.lambda[k], self.gamma[k]
            );
        }
        format!("{:016x}", crate::fnv1a64(&text))
    }

    /// Bath table as CSV with columns k, omega_k, eta_k, lambda_k, gamma_k.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,omega_k,eta_k,lambda_k,gamma_k\n");
        for k in 0..self.num_modes() {
            let _ = writeln!(
                out,
                "{},{:.12e},{:.12e},{:.12e},{:.12e}",
                k, self.omega[k], self.eta[k], self.lambda[k], self.gamma[k]
            );
        }
        out
    }
}

/// Build the discretized bath for `spec`.
///
/// Interval k = 0..M-1 is [L^(k-M), L^(k+1-M)] omega_c. Closed forms for the
/// power-law moments:
///   eta_k^2 = 2 a wc^(1-s) (b^(s+1) - a^(s+1)) / (s+1)
///   omega_k = (s+1)/(s+2) * (b^(s+2) - a^(s+2)) / (b^(s+1) - a^(s+1))
/// with a, b the interval edges.
pub fn discretize_bath(spec: &ModelSpec) -> Result<DiscretizedBath, BathError> {
    spec.validate()?;
    let m = spec.num_modes;
    let s = spec.s;
    let wc = spec.omega_c;
    let lg = spec.lambda_grid;
    let (w_lambda, w_gamma) = spec.coupling.weights();

    let mut omega = Vec::with_capacity(m);
    let mut eta = Vec::with_capacity(m);
    let mut lambda = Vec::with_capacity(m);
    let mut gamma = Vec::with_capacity(m);
    let mut half_sum = Vec::with_capacity(m);
    let mut half_diff = Vec::with_capacity(m);

    for k in 0..m {
        let a = lg.powi(k as i32 - m as i32) * wc;
        let b = lg.powi(k as i32 + 1 - m as i32) * wc;
        let mom0 = (b.powf(s + 1.0) - a.powf(s + 1.0)) / (s + 1.0);
        let mom1 = (b.powf(s + 2.0) - a.powf(s + 2.0)) / (s + 2.0);
        let eta2 = 2.0 * spec.alpha * wc.powf(1.0 - s) * mom0;
        let w_k = mom1 / mom0;
        let eta_k = eta2.sqrt();
        omega.push(w_k);
        eta.push(eta_k);
        lambda.push(w_lambda * eta_k);
        gamma.push(w_gamma * eta_k);
        half_sum.push((w_lambda + w_gamma) * eta_k / 2.0);
        half_diff.push((w_gamma - w_lambda) * eta_k / 2.0);
    }

    Ok(DiscretizedBath { omega, eta, lambda, gamma, half_sum, half_diff })
}

/// How observables of the original model read off the rotated one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ObservableRelabeling {
    /// <x_k> of the original equals -<p_k> of the rotated model (and vice
    /// versa); spin components swap as sigma_z -> -sigma_y, sigma_y -> sigma_z.
    SwapXWithNegP,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotatedSpec {
    pub spec: ModelSpec,
    pub relabeling: ObservableRelabeling,
}

/// Map the off-diagonal coupling model at zero bias onto its diagonal-form
/// equivalent via the spin rotation generated by sigma_x (angle -pi/2)
/// followed by a mode-wise quadrature rotation. The two Hamiltonians are
/// unitarily equivalent, so ground-state energies coincide; bath
/// localization moves from momentum space to position space.
pub fn rotate_offdiagonal_to_diagonal(spec: &ModelSpec) -> Result<RotatedSpec, BathError> {
    spec.validate()?;
    if spec.coupling != CouplingCase::OffDiagonal {
        return Err(BathError::NotOffDiagonal(spec.coupling.name()));
    }
    if spec.epsilon != 0.0 {
        return Err(BathError::NonzeroBias(spec.epsilon));
    }
    let mut rotated = spec.clone();
    rotated.coupling = CouplingCase::Diagonal;
    Ok(RotatedSpec { spec: rotated, relabeling: ObservableRelabeling::SwapXWithNegP })
}
