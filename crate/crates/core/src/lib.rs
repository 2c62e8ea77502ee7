//! Ground-state solver for the anisotropic spin-boson model (ASBM).
//!
//! A two-level system couples to a logarithmically discretized sub-Ohmic
//! bosonic bath through independent rotating-wave and counter-rotating-wave
//! channels. The ground state is found variationally with a multi-polaron
//! coherent-state ansatz, relaxed by simulated annealing over many random
//! restarts, and certified by the energy variance. Small instances are
//! cross-checked against exact diagonalization in a truncated Fock space.
//!
//! Module map:
//! - [`bath`]: spectral density, Wilson-mesh discretization, coupling cases
//! - [`ansatz`]: trial wavefunction, overlap kernels, energy evaluation
//! - [`solver`]: relaxation iteration, annealing, restarts, variance
//! - [`observables`]: spin expectations, entropy, quadratures, parity
//! - [`oracle`]: truncated-Fock-space reference (exact diagonalization)
//! - [`analysis`]: transition location, critical exponents, phase maps

pub mod analysis;
pub mod ansatz;
pub mod bath;
pub mod linalg;
pub mod observables;
pub mod oracle;
pub mod solver;

pub use num_complex::Complex64;

/// FNV-1a over a canonical string; used for spec/config fingerprints.
pub(crate) fn fnv1a64(text: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in text.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// SplitMix64 step; used to derive independent per-restart RNG seeds so
/// serial and parallel runs sample identical initial states.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
