//! Threshold detectors behind a lossy fibre.
//!
//! Each of Bob's two detectors has efficiency ξ (shared) and a per-gate dark
//! count probability. An `n`-photon input produces no click in either
//! detector with probability `(1−d0)(1−d1)(1−ξ)^n`, independent of the basis
//! Bob measures in. Misalignment is modelled as a visibility defect: a
//! fraction `e_align` of the light meant for one detector reaches the other.

use crate::error::{check_range, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams {
    /// Dark-count probability per gate, detector 0.
    pub d0: f64,
    /// Dark-count probability per gate, detector 1.
    pub d1: f64,
    /// Quantum efficiency ξ of both detectors.
    pub xi: f64,
    /// Probability that a photon reaches the wrong detector.
    pub e_align: f64,
}

impl DetectorParams {
    pub fn new(d0: f64, d1: f64, xi: f64, e_align: f64) -> Result<Self> {
        let p = Self {
            d0,
            d1,
            xi,
            e_align,
        };
        p.validate()?;
        Ok(p)
    }

    /// Perfect detectors: unit efficiency, no dark counts, no misalignment.
    pub fn ideal() -> Self {
        Self {
            d0: 0.0,
            d1: 0.0,
            xi: 1.0,
            e_align: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_range("d0", self.d0, 0.0, 1.0 - f64::EPSILON, "[0, 1)")?;
        check_range("d1", self.d1, 0.0, 1.0 - f64::EPSILON, "[0, 1)")?;
        if !(self.xi > 0.0 && self.xi <= 1.0) {
            return Err(Error::OutOfRange {
                name: "xi",
                value: self.xi,
                range: "(0, 1]",
            });
        }
        check_range("e_align", self.e_align, 0.0, 0.5, "[0, 0.5]")?;
        Ok(())
    }

    /// Dark-count probability of detector `bit`.
    pub fn dark(&self, bit: u8) -> f64 {
        if bit == 0 {
            self.d0
        } else {
            self.d1
        }
    }

    /// Probability that neither detector fires a dark count.
    pub fn no_dark(&self) -> f64 {
        (1.0 - self.d0) * (1.0 - self.d1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub loss_db_per_km: f64,
    pub distance_km: f64,
}

impl ChannelParams {
    pub fn new(loss_db_per_km: f64, distance_km: f64) -> Result<Self> {
        check_range("loss_db_per_km", loss_db_per_km, 0.0, f64::MAX, "[0, inf)")?;
        check_range("distance_km", distance_km, 0.0, f64::MAX, "[0, inf)")?;
        Ok(Self {
            loss_db_per_km,
            distance_km,
        })
    }

    pub fn lossless() -> Self {
        Self {
            loss_db_per_km: 0.0,
            distance_km: 0.0,
        }
    }

    /// `t = 10^(−loss·L/10)`.
    pub fn transmission(&self) -> f64 {
        10f64.powf(-self.loss_db_per_km * self.distance_km / 10.0)
    }
}

/// What Bob does with a double click.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DoubleClickPolicy {
    /// Record a uniformly random bit.
    #[default]
    RandomBit,
    /// Always record the given bit.
    Fixed(u8),
}

impl DoubleClickPolicy {
    /// Probability that a double click yields a bit different from `alice_bit`.
    pub fn error_prob(self, alice_bit: u8) -> f64 {
        match self {
            Self::RandomBit => 0.5,
            Self::Fixed(b) if b == alice_bit => 0.0,
            Self::Fixed(_) => 1.0,
        }
    }
}

/// Reference-to-signal intensity ratio `|β|²/|α|²` of a bright-reference source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrightReference {
    pub intensity_ratio: f64,
}

impl BrightReference {
    pub fn from_amplitudes(alpha_sig: f64, beta_ref: f64) -> Result<Self> {
        if !(alpha_sig > 0.0) || !(beta_ref > 0.0) {
            return Err(Error::OutOfRange {
                name: "bright-reference amplitude",
                value: alpha_sig.min(beta_ref),
                range: "(0, inf)",
            });
        }
        if beta_ref < alpha_sig {
            return Err(Error::OutOfRange {
                name: "beta_ref",
                value: beta_ref,
                range: "[alpha_sig, inf)",
            });
        }
        Ok(Self {
            intensity_ratio: (beta_ref / alpha_sig).powi(2),
        })
    }

    /// `c² = |β|²/(|α|² + |β|²)`.
    pub fn c_squared(&self) -> f64 {
        self.intensity_ratio / (1.0 + self.intensity_ratio)
    }
}

/// Coupling of Bob's asymmetric first beam splitter in the double
/// Mach-Zehnder readout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub c_squared: f64,
    /// Mean photon number reaching the detectors, `2c²|α|²`.
    pub detected_mean: f64,
}

pub fn bright_ref_coupling(alpha_sig: f64, beta_ref: f64) -> Result<Coupling> {
    let c_squared = BrightReference::from_amplitudes(alpha_sig, beta_ref)?.c_squared();
    Ok(Coupling {
        c_squared,
        detected_mean: 2.0 * c_squared * alpha_sig * alpha_sig,
    })
}

/// Mean photon number delivered to Bob's detector pair for a signal of mean
/// `μ = 2|α|²` before channel loss.
pub fn detected_mean(mu: f64, bright: Option<BrightReference>) -> f64 {
    match bright {
        None => mu,
        Some(b) => b.c_squared() * mu,
    }
}

/// No click in either detector for an `n`-photon input.
pub fn prob_inconclusive_n(n: u32, det: &DetectorParams) -> f64 {
    det.no_dark() * (1.0 - det.xi).powi(n as i32)
}

/// No click in either detector for a coherent input of mean μ.
pub fn prob_inconclusive_coherent(mu: f64, det: &DetectorParams) -> f64 {
    det.no_dark() * (-det.xi * mu).exp()
}

/// The Poisson mixture `Σ_n e^{−μ} μⁿ/n! · P(n, inconclusive)`, summed until
/// the remaining Poisson tail drops below [`crate::tolerances::POISSON_TAIL`].
pub fn poisson_mixture_inconclusive(mu: f64, det: &DetectorParams) -> f64 {
    let mut weight = (-mu).exp();
    let mut cumulative = 0.0;
    let mut sum = 0.0;
    let mut n = 0u32;
    loop {
        sum += weight * prob_inconclusive_n(n, det);
        cumulative += weight;
        if 1.0 - cumulative < crate::tolerances::POISSON_TAIL && f64::from(n) > mu {
            break;
        }
        n += 1;
        weight *= mu / f64::from(n);
    }
    sum
}

/// Detection probability `Q = 1 − (1−d0)(1−d1)e^{−ξ t μ_eff}`.
pub fn detection_prob(
    mu: f64,
    chan: &ChannelParams,
    det: &DetectorParams,
    bright: Option<BrightReference>,
) -> f64 {
    let lambda = det.xi * chan.transmission() * detected_mean(mu, bright);
    -((-det.d0).ln_1p() + (-det.d1).ln_1p() - lambda).exp_m1()
}

/// Joint distribution of light-induced clicks on the arm Alice's bit should
/// reach ("right") and the other arm ("wrong"), before dark counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightClicks {
    pub none: f64,
    pub right_only: f64,
    pub wrong_only: f64,
    pub both: f64,
}

impl LightClicks {
    /// Coherent light: independent Poisson arms with detected means
    /// `(1−e)λ` and `eλ`.
    pub fn coherent(lambda: f64, e_align: f64) -> Self {
        let lr = (1.0 - e_align) * lambda;
        let lw = e_align * lambda;
        let (miss_r, miss_w) = ((-lr).exp(), (-lw).exp());
        let (hit_r, hit_w) = (-(-lr).exp_m1(), -(-lw).exp_m1());
        Self {
            none: miss_r * miss_w,
            right_only: hit_r * miss_w,
            wrong_only: miss_r * hit_w,
            both: hit_r * hit_w,
        }
    }

    /// One photon that would reach the wrong arm with probability `q_wrong`
    /// in a perfectly aligned receiver.
    pub fn single_photon(xi: f64, q_wrong: f64, e_align: f64) -> Self {
        let w = (1.0 - e_align) * q_wrong + e_align * (1.0 - q_wrong);
        Self {
            none: 1.0 - xi,
            right_only: xi * (1.0 - w),
            wrong_only: xi * w,
            both: 0.0,
        }
    }
}

/// Click probability and error probability for one of Alice's bits, once dark
/// counts are added.
pub fn conclusive_stats(
    light: LightClicks,
    det: &DetectorParams,
    alice_bit: u8,
    policy: DoubleClickPolicy,
) -> (f64, f64) {
    let dr = det.dark(alice_bit);
    let dw = det.dark(1 - alice_bit);
    let right = (1.0 - dw) * (light.right_only + light.none * dr);
    let wrong = (1.0 - dr) * (light.wrong_only + light.none * dw);
    let both = light.both + light.right_only * dw + light.wrong_only * dr + light.none * dr * dw;
    let q = right + wrong + both;
    let err = wrong + both * policy.error_prob(alice_bit);
    (q, err)
}

/// Sifted-key bit error rate for an undisturbed coherent signal.
///
/// Errors come from misalignment (`e_align` of the light reaching the wrong
/// detector) and from dark counts; double clicks are resolved by `policy`.
/// Fails when the detection probability is zero.
pub fn intrinsic_error_rate(
    mu: f64,
    chan: &ChannelParams,
    det: &DetectorParams,
    bright: Option<BrightReference>,
    policy: DoubleClickPolicy,
) -> Result<f64> {
    let lambda = det.xi * chan.transmission() * detected_mean(mu, bright);
    let light = LightClicks::coherent(lambda, det.e_align);
    let (mut q, mut err) = (0.0, 0.0);
    for bit in 0..2 {
        let (qb, eb) = conclusive_stats(light, det, bit, policy);
        q += qb;
        err += eb;
    }
    if q <= 0.0 {
        return Err(Error::OutOfRange {
            name: "Q",
            value: q,
            range: "(0, 1]",
        });
    }
    Ok((err / q).clamp(0.0, 0.5))
}
