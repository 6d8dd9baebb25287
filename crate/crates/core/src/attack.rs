//! Unambiguous key discrimination against a source that modulates the
//! reference phase together with the signal phase.
//!
//! Truncated to zero and one photon, the four signals live in a qutrit spanned
//! by the vacuum and the two single-photon modes `0_Z`, `1_Z`. The two signals
//! carrying the same key bit span a plane; the vector orthogonal to that plane
//! never fires on that bit, so a projective element along it identifies the
//! other bit with certainty.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use num_complex::Complex64;

use crate::error::{check_range, Error, Result};
use crate::qmath::SmallMatrix;
use crate::tolerances;

/// Amplitudes over `{vac, 0_Z, 1_Z}`; subnormalized after truncation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QutritVector(pub [Complex64; 3]);

impl QutritVector {
    pub fn real(v: [f64; 3]) -> Self {
        Self(v.map(|x| Complex64::new(x, 0.0)))
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &QutritVector) -> Complex64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.map(|a| a * s))
    }
}

fn check_mu(mu: f64) -> Result<f64> {
    check_range("mu", mu, 0.0, f64::MAX, "[0, inf)")
}

/// Truncated signals in the order `0_Z, 0_X, 1_Z, 1_X`, with `α = √(μ/2)`.
pub fn ukd_signals(mu: f64) -> Result<[QutritVector; 4]> {
    check_mu(mu)?;
    let a = (mu / 2.0).sqrt();
    let w = (-mu / 2.0).exp();
    Ok([
        QutritVector::real([1.0, SQRT_2 * a, 0.0]).scaled(w),
        QutritVector::real([1.0, a, a]).scaled(w),
        QutritVector::real([1.0, 0.0, SQRT_2 * a]).scaled(w),
        QutritVector::real([1.0, a, -a]).scaled(w),
    ])
}

/// Inverse squared normalizations `(2+√2)[1 + (½ ± 1/(2√2))μ]` of the two
/// conclusive vectors, `+` for bit 0.
pub fn conclusive_norms_inv_sq(mu: f64) -> (f64, f64) {
    let k = 0.5 * FRAC_1_SQRT_2;
    (
        (2.0 + SQRT_2) * (1.0 + (0.5 + k) * mu),
        (2.0 + SQRT_2) * (1.0 + (0.5 - k) * mu),
    )
}

/// Unit vectors orthogonal to both bit-0 signals and to both bit-1 signals.
pub fn conclusive_vectors(mu: f64) -> Result<(QutritVector, QutritVector)> {
    check_mu(mu)?;
    let a = (mu / 2.0).sqrt();
    let (n0, n1) = conclusive_norms_inv_sq(mu);
    let v0 = QutritVector::real([-SQRT_2 * a - a, 1.0 + FRAC_1_SQRT_2, FRAC_1_SQRT_2])
        .scaled(n0.sqrt().recip());
    let v1 = QutritVector::real([-a, 1.0 + FRAC_1_SQRT_2, FRAC_1_SQRT_2]).scaled(n1.sqrt().recip());
    Ok((v0, v1))
}

/// Three-outcome measurement: `e0` announces bit 0, `e1` bit 1, `e_dk` is
/// inconclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct UkdPovm {
    /// `½|1⊥⟩⟨1⊥|`, zero on both bit-1 signals.
    pub e0: SmallMatrix,
    /// `½|0⊥⟩⟨0⊥|`, zero on both bit-0 signals.
    pub e1: SmallMatrix,
    pub e_dk: SmallMatrix,
}

impl UkdPovm {
    pub fn elements(&self) -> [&SmallMatrix; 3] {
        [&self.e0, &self.e1, &self.e_dk]
    }

    /// Smallest eigenvalue of each element.
    pub fn min_eigenvalues(&self) -> [f64; 3] {
        self.elements().map(|e| e.min_eigenvalue())
    }

    /// `max |E0 + E1 + E_DK − I|`.
    pub fn completeness_deviation(&self) -> f64 {
        let sum = &(&self.e0 + &self.e1) + &self.e_dk;
        sum.max_abs_diff(&SmallMatrix::identity(3).expect("3x3"))
    }

    /// Outcome probabilities `(p0, p1, p_dk)` for a (subnormalized) qutrit
    /// vector; `p_dk` also absorbs the weight lost to truncation.
    pub fn outcome_probs(&self, v: &QutritVector) -> [f64; 3] {
        let p = |e: &SmallMatrix| e.expectation(v.as_slice()).expect("dim 3").re.max(0.0);
        let (p0, p1) = (p(&self.e0), p(&self.e1));
        [p0, p1, (1.0 - p0 - p1).max(0.0)]
    }
}

/// Builds the measurement and checks every element is PSD.
pub fn ukd_povm(mu: f64) -> Result<UkdPovm> {
    let (v0, v1) = conclusive_vectors(mu)?;
    let e0 = SmallMatrix::projector(v1.as_slice())?.scale(0.5);
    let e1 = SmallMatrix::projector(v0.as_slice())?.scale(0.5);
    let id = SmallMatrix::identity(3)?;
    let e_dk = &(&id - &e0) - &e1;
    let povm = UkdPovm { e0, e1, e_dk };
    for e in povm.elements() {
        let m = e.min_eigenvalue();
        if m < tolerances::PSD_EIGENVALUE {
            return Err(Error::NotPsd(m));
        }
    }
    Ok(povm)
}

/// Closed-form probability of a conclusive (and correct) outcome given the
/// key bit: `(½ − 1/(2√2))·μe^{−μ}/[1 + (½ ∓ 1/(2√2))μ]`, `−` for bit 0.
pub fn conclusive_prob(key_bit: u8, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    let k = 0.5 * FRAC_1_SQRT_2;
    let bracket = match key_bit {
        0 => 1.0 + (0.5 - k) * mu,
        1 => 1.0 + (0.5 + k) * mu,
        _ => return Err(Error::Unsupported(format!("key bit {key_bit}"))),
    };
    Ok((0.5 - k) * mu * (-mu).exp() / bracket)
}

/// Same probability evaluated as `tr(E_b |s⟩⟨s|)` averaged over the two
/// signals carrying bit `b`.
pub fn conclusive_prob_matrix(key_bit: u8, mu: f64) -> Result<f64> {
    let signals = ukd_signals(mu)?;
    let povm = ukd_povm(mu)?;
    let (e, pair) = match key_bit {
        0 => (&povm.e0, [0, 1]),
        1 => (&povm.e1, [2, 3]),
        _ => return Err(Error::Unsupported(format!("key bit {key_bit}"))),
    };
    let mut total = 0.0;
    for i in pair {
        let rho = SmallMatrix::projector(signals[i].as_slice())?;
        total += (e * &rho).trace().re;
    }
    Ok(total / 2.0)
}

/// BB84 qubit `|bit⟩` in basis `z` (true) or `x` (false).
pub fn qubit_state(bit: u8, z_basis: bool) -> [f64; 2] {
    match (z_basis, bit) {
        (true, 0) => [1.0, 0.0],
        (true, _) => [0.0, 1.0],
        (false, 0) => [FRAC_1_SQRT_2, FRAC_1_SQRT_2],
        (false, _) => [FRAC_1_SQRT_2, -FRAC_1_SQRT_2],
    }
}

/// Normalized equal-weight superposition of `|bit_Z⟩` and `|bit_X⟩`, phased
/// so the two add constructively; the single photon resent after a
/// conclusive outcome.
pub fn resend_state(bit: u8) -> [f64; 2] {
    let (z, x) = (qubit_state(bit, true), qubit_state(bit, false));
    let s = (z[0] * x[0] + z[1] * x[1]).signum();
    let v = [z[0] + s * x[0], z[1] + s * x[1]];
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    [v[0] / n, v[1] / n]
}

/// Probability that Bob, measuring the resent photon in the given basis,
/// gets the wrong bit.
pub fn resend_wrong_prob(bit: u8, z_basis: bool) -> f64 {
    let psi = resend_state(bit);
    let wrong = qubit_state(1 - bit, z_basis);
    (psi[0] * wrong[0] + psi[1] * wrong[1]).powi(2)
}

/// Bit error rate of the intercept/resend attack, averaged over key bit and
/// Bob's basis.
pub fn resend_error_rate() -> f64 {
    let mut sum = 0.0;
    for bit in 0..2 {
        for z in [true, false] {
            sum += resend_wrong_prob(bit, z);
        }
    }
    sum / 4.0
}

/// Left side of the security condition `3.42·μe^{μ}[1 + 0.854μ] < 0.086`.
pub fn threshold_lhs(mu: f64) -> f64 {
    3.42 * mu * mu.exp() * (1.0 + 0.854 * mu)
}

/// Largest μ for which the phase-randomized protocol stays provably secure
/// against this attack.
pub fn secure_mu_threshold() -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > tolerances::BISECTION {
        let mid = 0.5 * (lo + hi);
        if threshold_lhs(mid) < 0.086 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
