//! Numeric tolerances used across the crate.
//!
//! Structural checks (Hermiticity, POVM completeness, PSD) use
//! [`STRUCTURAL`]; scalar identities use [`SCALAR`].

/// Default tolerance for matrix-structure checks.
pub const STRUCTURAL: f64 = 1e-10;

/// Default tolerance for scalar identities.
pub const SCALAR: f64 = 1e-12;

/// Most negative eigenvalue accepted for a positive semidefinite matrix.
pub const PSD_EIGENVALUE: f64 = -1e-10;

/// Eigenvalues of PSD inputs below this are treated as roundoff and clamped to 0
/// before taking square roots.
pub const EIGEN_CLAMP: f64 = 1e-12;

/// Allowed deviation of a density-matrix trace from 1.
pub const UNIT_TRACE: f64 = 1e-12;

/// Convergence width of the phase-error bisection.
pub const BISECTION: f64 = 1e-12;

/// Subnormalised qutrit vectors may exceed unit norm by this much.
pub const QUTRIT_NORM: f64 = 1e-12;

/// Poisson tail cut for explicit photon-number sums.
pub const POISSON_TAIL: f64 = 1e-14;
