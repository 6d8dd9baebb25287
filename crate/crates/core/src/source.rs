//! BB84 signal sets built from pairs of coherent pulses, and the basis
//! dependence ("coin imbalance") they leak.
//!
//! Throughout, `μ = 2|α|²` is the mean photon number of a signal: for the
//! equal-strength sources it is the total over reference and signal pulse,
//! for a bright reference it is twice the signal-pulse mean.

use std::f64::consts::FRAC_PI_4;

use num_complex::Complex64;

use crate::detection::BrightReference;
use crate::error::{Error, Result};
use crate::qmath::{coherent_overlap, ComplexAmplitude, SmallMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VariantKind {
    /// Reference phase identical for all four signals.
    UnmodulatedRef,
    /// Reference phase modulated together with the signal phase.
    ModulatedRef,
    /// Unmodulated reference pulse with `|β| ≥ |α|`.
    BrightRef,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceVariant {
    pub kind: VariantKind,
    /// Signal-pulse amplitude.
    pub alpha: ComplexAmplitude,
    /// Reference-pulse amplitude.
    pub beta: ComplexAmplitude,
}

impl SourceVariant {
    pub fn unmodulated(alpha: ComplexAmplitude) -> Self {
        Self {
            kind: VariantKind::UnmodulatedRef,
            alpha,
            beta: alpha,
        }
    }

    pub fn modulated(alpha: ComplexAmplitude) -> Self {
        Self {
            kind: VariantKind::ModulatedRef,
            alpha,
            beta: alpha,
        }
    }

    pub fn bright(alpha: ComplexAmplitude, beta: ComplexAmplitude) -> Result<Self> {
        if !(beta.norm() >= alpha.norm()) {
            return Err(Error::OutOfRange {
                name: "|beta|",
                value: beta.norm(),
                range: "[|alpha|, inf)",
            });
        }
        Ok(Self {
            kind: VariantKind::BrightRef,
            alpha,
            beta,
        })
    }

    /// Variant with real positive `α = √(μ/2)`; a bright reference gets
    /// `|β|² = ratio·|α|²`.
    pub fn with_mu(kind: VariantKind, mu: f64, bright_ratio: f64) -> Result<Self> {
        crate::error::check_range("mu", mu, 0.0, f64::MAX, "[0, inf)")?;
        let alpha = Complex64::new((mu / 2.0).sqrt(), 0.0);
        match kind {
            VariantKind::UnmodulatedRef => Ok(Self::unmodulated(alpha)),
            VariantKind::ModulatedRef => Ok(Self::modulated(alpha)),
            VariantKind::BrightRef => {
                crate::error::check_range("ref_ratio", bright_ratio, 1.0, f64::MAX, "[1, inf)")?;
                Self::bright(alpha, alpha * bright_ratio.sqrt())
            }
        }
    }

    /// `μ = 2|α|²`.
    pub fn mu(&self) -> f64 {
        2.0 * self.alpha.norm_sqr()
    }

    /// Double Mach-Zehnder coupling data for a bright reference.
    pub fn bright_reference(&self) -> Option<BrightReference> {
        match self.kind {
            VariantKind::BrightRef if self.alpha.norm_sqr() > 0.0 => Some(BrightReference {
                intensity_ratio: self.beta.norm_sqr() / self.alpha.norm_sqr(),
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignalLabel {
    ZeroX,
    OneX,
    ZeroY,
    OneY,
}

impl SignalLabel {
    pub const ALL: [SignalLabel; 4] = [Self::ZeroX, Self::OneX, Self::ZeroY, Self::OneY];

    pub fn new(basis: Basis, bit: u8) -> Self {
        match (basis, bit) {
            (Basis::X, 0) => Self::ZeroX,
            (Basis::X, _) => Self::OneX,
            (Basis::Y, 0) => Self::ZeroY,
            (Basis::Y, _) => Self::OneY,
        }
    }

    pub fn basis(self) -> Basis {
        match self {
            Self::ZeroX | Self::OneX => Basis::X,
            Self::ZeroY | Self::OneY => Basis::Y,
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Self::ZeroX | Self::ZeroY => 0,
            Self::OneX | Self::OneY => 1,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Product coherent state `|reference⟩_R ⊗ |signal⟩_S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeCoherent {
    pub reference: ComplexAmplitude,
    pub signal: ComplexAmplitude,
}

impl TwoModeCoherent {
    pub fn new(reference: ComplexAmplitude, signal: ComplexAmplitude) -> Self {
        Self { reference, signal }
    }

    pub fn mean_photons(&self) -> f64 {
        self.reference.norm_sqr() + self.signal.norm_sqr()
    }

    /// `⟨other|self⟩`.
    pub fn overlap(&self, other: &TwoModeCoherent) -> Complex64 {
        coherent_overlap(self.reference, other.reference)
            * coherent_overlap(self.signal, other.signal)
    }

    /// Fock amplitudes `⟨m,n|self⟩` for all `m + n ≤ max_photons`, ordered by
    /// total photon number and then by decreasing `m`.
    pub fn fock_amplitudes(&self, max_photons: usize) -> Vec<Complex64> {
        let norm = (-self.mean_photons() / 2.0).exp();
        let mut out = Vec::new();
        for total in 0..=max_photons {
            for m in (0..=total).rev() {
                let n = total - m;
                let denom = (factorial(m) * factorial(n)).sqrt();
                out.push(norm * self.reference.powu(m as u32) * self.signal.powu(n as u32) / denom);
            }
        }
        out
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// The four BB84 signals of a source variant.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSet {
    pub variant: SourceVariant,
    states: [TwoModeCoherent; 4],
}

impl SignalSet {
    pub fn state(&self, label: SignalLabel) -> TwoModeCoherent {
        self.states[label.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (SignalLabel, TwoModeCoherent)> + '_ {
        SignalLabel::ALL.iter().map(move |&l| (l, self.state(l)))
    }

    /// Exact Gram matrix `G_ij = ⟨s_i|s_j⟩` in label order.
    pub fn gram_matrix(&self) -> SmallMatrix {
        SmallMatrix::from_fn(4, |i, j| self.states[j].overlap(&self.states[i]))
            .expect("4x4 is in range")
    }

    /// Gram matrix of the signals projected onto total photon number `≤ max_photons`.
    pub fn truncated_gram_matrix(&self, max_photons: usize) -> SmallMatrix {
        let vecs: Vec<Vec<Complex64>> = self
            .states
            .iter()
            .map(|s| s.fock_amplitudes(max_photons))
            .collect();
        SmallMatrix::from_fn(4, |i, j| {
            vecs[i]
                .iter()
                .zip(&vecs[j])
                .map(|(a, b)| a.conj() * b)
                .sum()
        })
        .expect("4x4 is in range")
    }
}

/// Signal amplitudes (reference, signal) for each label.
pub fn make_signal_set(variant: SourceVariant) -> SignalSet {
    let a = variant.alpha;
    let i = Complex64::i();
    let states = match variant.kind {
        VariantKind::UnmodulatedRef | VariantKind::BrightRef => {
            let r = variant.beta;
            [
                TwoModeCoherent::new(r, a),
                TwoModeCoherent::new(r, -a),
                TwoModeCoherent::new(r, i * a),
                TwoModeCoherent::new(r, -i * a),
            ]
        }
        VariantKind::ModulatedRef => {
            let minus = Complex64::from_polar(1.0, -FRAC_PI_4);
            let plus = Complex64::from_polar(1.0, FRAC_PI_4);
            [
                TwoModeCoherent::new(a, a),
                TwoModeCoherent::new(-i * a, i * a),
                TwoModeCoherent::new(minus * a, plus * a),
                TwoModeCoherent::new(plus * a, minus * a),
            ]
        }
    };
    SignalSet { variant, states }
}

/// Number of eigenvalues of a Hermitian matrix above `tol`.
pub fn numerical_rank(m: &SmallMatrix, tol: f64) -> usize {
    m.eigenvalues().into_iter().filter(|&x| x > tol).count()
}

/// `⟨Ψ_y|Ψ_x⟩ = e^{−μ/2}(cos(μ/2) + sin(μ/2))`, overlap of the two
/// basis purifications.
pub fn purification_overlap(mu: f64) -> f64 {
    let x = mu / 2.0;
    (-x).exp() * (x.cos() + x.sin())
}

/// Coin imbalance `Δ = ½(1 − ⟨Ψ_y|Ψ_x⟩)`.
///
/// The closed form loses all precision for tiny μ (Δ ≈ μ²/8), so below μ = 2
/// this sums the Taylor series of `−½ (Re+Im)(e^{(i−1)μ/2} − 1)` term by term.
/// The coefficients `(Re+Im)((i−1)^n)` are exact integers.
pub fn coin_imbalance(mu: f64) -> f64 {
    if mu > 2.0 {
        return 0.5 * (1.0 - purification_overlap(mu));
    }
    let x = mu / 2.0;
    // (i-1)^n tracked as exact integers in f64
    let (mut re, mut im) = (-1.0_f64, 1.0_f64);
    let mut power = x; // x^n / n!
    let mut sum = 0.0;
    for n in 2..80u32 {
        let (r, i) = (-re - im, re - im);
        re = r;
        im = i;
        power *= x / f64::from(n);
        let term = (re + im) * power;
        sum += term;
        if power * 2f64.powf(f64::from(n + 1) / 2.0) < 1e-18 * sum.abs() {
            break;
        }
    }
    (-0.5 * sum).max(0.0)
}

/// Result of dividing an imbalance by a detection fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveImbalance {
    pub value: f64,
    /// True when `Δ / fraction` exceeded ½ and was saturated.
    pub clamped: bool,
}

/// `Δ′ = Δ / detection_fraction`, saturated at ½.
pub fn effective_imbalance(delta: f64, detection_fraction: f64) -> Result<EffectiveImbalance> {
    crate::error::check_range("delta", delta, 0.0, f64::MAX, "[0, inf)")?;
    if !(detection_fraction > 0.0 && detection_fraction <= 1.0) {
        return Err(Error::OutOfRange {
            name: "detection_fraction",
            value: detection_fraction,
            range: "(0, 1]",
        });
    }
    let raw = delta / detection_fraction;
    Ok(if raw > 0.5 {
        EffectiveImbalance {
            value: 0.5,
            clamped: true,
        }
    } else {
        EffectiveImbalance {
            value: raw,
            clamped: false,
        }
    })
}

/// Probability that a Poissonian source with mean μ emits two or more photons,
/// `1 − e^{−μ}(1+μ)`.
pub fn multiphoton_prob(mu: f64) -> f64 {
    if mu >= 1.0 {
        return 1.0 - (-mu).exp() * (1.0 + mu);
    }
    let mut term = mu * mu / 2.0;
    let mut sum = 0.0;
    let mut n = 2.0;
    while term > 1e-18 * sum || sum == 0.0 {
        sum += term;
        n += 1.0;
        term *= mu / n;
        if term == 0.0 {
            break;
        }
    }
    (-mu).exp() * sum
}

/// μ, Δ and Δ′ for one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoinStats {
    pub mu: f64,
    pub delta: f64,
    pub delta_prime: f64,
    pub clamped: bool,
}

impl CoinStats {
    pub fn new(mu: f64, detection_fraction: f64) -> Result<Self> {
        let delta = coin_imbalance(mu);
        let eff = effective_imbalance(delta, detection_fraction)?;
        Ok(Self {
            mu,
            delta,
            delta_prime: eff.value,
            clamped: eff.clamped,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn unmodulated_table() {
        let set = make_signal_set(SourceVariant::unmodulated(c(0.2, 0.0)));
        assert_eq!(
            set.state(SignalLabel::ZeroX),
            TwoModeCoherent::new(c(0.2, 0.0), c(0.2, 0.0))
        );
        assert_eq!(
            set.state(SignalLabel::OneX),
            TwoModeCoherent::new(c(0.2, 0.0), c(-0.2, 0.0))
        );
        assert_eq!(set.state(SignalLabel::ZeroY).signal, c(0.0, 0.2));
        assert_eq!(set.state(SignalLabel::OneY).signal, c(0.0, -0.2));
        assert!(set.iter().all(|(_, s)| s.reference == c(0.2, 0.0)));
    }

    #[test]
    fn modulated_table() {
        let set = make_signal_set(SourceVariant::modulated(c(0.2, 0.0)));
        let one_x = set.state(SignalLabel::OneX);
        assert!((one_x.reference - c(0.0, -0.2)).norm() < 1e-16);
        assert!((one_x.signal - c(0.0, 0.2)).norm() < 1e-16);
        let zero_y = set.state(SignalLabel::ZeroY);
        let s = 0.2 / 2f64.sqrt();
        assert!((zero_y.reference - c(s, -s)).norm() < 1e-15);
        assert!((zero_y.signal - c(s, s)).norm() < 1e-15);
    }

    #[test]
    fn vacuum_signals() {
        for kind in [VariantKind::UnmodulatedRef, VariantKind::ModulatedRef] {
            let set = make_signal_set(SourceVariant::with_mu(kind, 0.0, 1.0).unwrap());
            assert!(set.iter().all(|(_, s)| s.mean_photons() == 0.0));
        }
    }

    #[test]
    fn bright_reference_requires_brighter_beta() {
        assert!(SourceVariant::bright(c(0.3, 0.0), c(0.2, 0.0)).is_err());
        let v = SourceVariant::bright(c(0.2, 0.0), c(2.0, 0.0)).unwrap();
        let set = make_signal_set(v);
        assert!(set.iter().all(|(_, s)| s.reference == c(2.0, 0.0)));
        let b = v.bright_reference().unwrap();
        assert!((b.intensity_ratio - 100.0).abs() < 1e-9);
    }

    #[test]
    fn imbalance_examples() {
        assert_eq!(purification_overlap(0.0), 1.0);
        assert_eq!(coin_imbalance(0.0), 0.0);
        assert!((purification_overlap(0.1) - 0.997_582_291_837_813_1).abs() < 1e-15);
        assert!((coin_imbalance(0.1) - 1.208_854_081_093_440_4e-3).abs() < 1e-17);
        assert!((multiphoton_prob(0.1) - 4.678_840_160_444_47e-3).abs() < 1e-17);
        assert_eq!(multiphoton_prob(0.0), 0.0);
    }

    #[test]
    fn imbalance_series_matches_closed_form() {
        for k in 1..=300 {
            let mu = 0.01 * k as f64;
            let closed = 0.5 * (1.0 - purification_overlap(mu));
            assert!((coin_imbalance(mu) - closed).abs() < 1e-15, "mu={mu}");
            assert!((purification_overlap(mu) - (1.0 - 2.0 * coin_imbalance(mu))).abs() < 1e-12);
        }
        // far below where the closed form cancels to zero
        let mu = 1e-9;
        assert!((coin_imbalance(mu) / (mu * mu / 8.0) - 1.0).abs() < 1e-8);
        assert!((multiphoton_prob(mu) / (mu * mu / 2.0) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn imbalance_monotone() {
        let mut prev = 0.0;
        for k in 0..=3000 {
            let d = coin_imbalance(k as f64 * 1e-3);
            assert!(d >= prev);
            prev = d;
        }
    }

    #[test]
    fn multiphoton_bound() {
        for k in 1..=1000 {
            let mu = 2.0 * k as f64 / 1000.0;
            assert!(multiphoton_prob(mu) <= mu * mu / 2.0);
        }
    }

    #[test]
    fn effective_imbalance_cases() {
        let d = coin_imbalance(0.01);
        assert_eq!(effective_imbalance(d, 1.0).unwrap().value, d);
        assert!(effective_imbalance(d, 0.0).is_err());
        assert!(effective_imbalance(d, 1.5).is_err());

        let eta = 1e-3;
        let mu = 1e-4;
        let e = effective_imbalance(coin_imbalance(mu), eta * mu).unwrap();
        assert!((e.value / (mu / (8.0 * eta)) - 1.0).abs() < 1e-3);
        assert!(!e.clamped);

        // bright reference: μ → 2μ_S in both places
        let mu_s = 5e-5;
        let e = effective_imbalance(coin_imbalance(2.0 * mu_s), 2.0 * eta * mu_s).unwrap();
        assert!((e.value / (mu_s / (4.0 * eta)) - 1.0).abs() < 1e-3);

        let sat = effective_imbalance(0.3, 0.1).unwrap();
        assert_eq!(sat.value, 0.5);
        assert!(sat.clamped);
    }

    #[test]
    fn gram_ranks_in_single_photon_sector() {
        for mu in [0.01, 0.1, 0.5] {
            let tol = 1e-6 * mu;
            let un = make_signal_set(
                SourceVariant::with_mu(VariantKind::UnmodulatedRef, mu, 1.0).unwrap(),
            );
            assert_eq!(
                numerical_rank(&un.truncated_gram_matrix(1), tol),
                2,
                "mu={mu}"
            );
            let md = make_signal_set(
                SourceVariant::with_mu(VariantKind::ModulatedRef, mu, 1.0).unwrap(),
            );
            assert_eq!(
                numerical_rank(&md.truncated_gram_matrix(1), tol),
                3,
                "mu={mu}"
            );
        }
    }

    #[test]
    fn truncation_at_four_photons_is_accurate() {
        for mu in [0.1, 0.3, 0.5] {
            for kind in [VariantKind::UnmodulatedRef, VariantKind::ModulatedRef] {
                let set = make_signal_set(SourceVariant::with_mu(kind, mu, 1.0).unwrap());
                let err = set
                    .truncated_gram_matrix(4)
                    .max_abs_diff(&set.gram_matrix());
                // bounded by the Poisson weight above four photons
                let kept: f64 = (0..=4)
                    .map(|n| (-mu).exp() * mu.powi(n) / factorial(n as usize))
                    .sum();
                assert!(err <= 1.0 - kept + 1e-15, "{kind:?} mu={mu} err={err}");
                if mu <= 0.1 {
                    assert!(err < 1e-6);
                }
            }
        }
    }

    #[test]
    fn coin_stats_consistent() {
        let s = CoinStats::new(0.1, 0.05).unwrap();
        assert_eq!(s.delta, coin_imbalance(0.1));
        assert!(s.delta_prime >= s.delta);
    }
}
