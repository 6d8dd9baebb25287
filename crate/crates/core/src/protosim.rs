//! Seeded Monte Carlo of BB84 rounds.
//!
//! Each round draws Alice's basis and bit and Bob's basis, sends Alice's
//! two-mode coherent signal through Bob's interferometer, and samples photon
//! numbers per detector arm. Because coherent states factorize over beam
//! splitters, the arm counts are independent Poisson variables with means
//! `|⟨u_k|a⟩|²·t`, where `u_k` is the mode Bob's arm `k` selects. Each photon
//! fires its detector with probability ξ, and dark counts are added
//! independently.
//!
//! Round `i` uses its own ChaCha8 stream `(seed, i)`, so a run gives the same
//! tally whether it is evaluated serially or in parallel.

use std::io::{self, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;

use crate::attack::{conclusive_prob, resend_wrong_prob, ukd_povm, ukd_signals};
use crate::detection::{
    conclusive_stats, detection_prob, intrinsic_error_rate, ChannelParams, DetectorParams,
    DoubleClickPolicy, LightClicks,
};
use crate::error::{Error, Result};
use crate::source::{make_signal_set, Basis, SignalLabel, SourceVariant, VariantKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EveStrategy {
    #[default]
    None,
    /// Unambiguous key discrimination on the zero/one-photon part, resending
    /// a single photon after every conclusive outcome and blocking otherwise.
    UkdInterceptResend,
}

/// Counts accumulated over a run. All fields are additive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct RoundTally {
    pub sent: u64,
    pub detected: u64,
    pub sifted: u64,
    pub double_clicks: u64,
    pub errors_x: u64,
    pub sifted_x: u64,
    pub errors_y: u64,
    pub sifted_y: u64,
    /// Rounds in which Bob measured in X.
    pub bob_x: u64,
    /// Rounds in which Bob measured in X and neither detector fired.
    pub bob_x_inconclusive: u64,
    pub bob_y: u64,
    pub bob_y_inconclusive: u64,
}

impl RoundTally {
    pub const CSV_HEADER: &'static str = "sent,detected,sifted,double_clicks,errors_x,sifted_x,errors_y,sifted_y,bob_x,bob_x_inconclusive,bob_y,bob_y_inconclusive";

    pub fn merge(mut self, o: &RoundTally) -> Self {
        self.sent += o.sent;
        self.detected += o.detected;
        self.sifted += o.sifted;
        self.double_clicks += o.double_clicks;
        self.errors_x += o.errors_x;
        self.sifted_x += o.sifted_x;
        self.errors_y += o.errors_y;
        self.sifted_y += o.sifted_y;
        self.bob_x += o.bob_x;
        self.bob_x_inconclusive += o.bob_x_inconclusive;
        self.bob_y += o.bob_y;
        self.bob_y_inconclusive += o.bob_y_inconclusive;
        self
    }

    pub fn is_consistent(&self) -> bool {
        self.sifted <= self.detected
            && self.detected <= self.sent
            && self.errors_x <= self.sifted_x
            && self.errors_y <= self.sifted_y
            && self.sifted_x + self.sifted_y == self.sifted
            && self.bob_x + self.bob_y == self.sent
            && self.bob_x_inconclusive + self.bob_y_inconclusive + self.detected == self.sent
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.sent,
            self.detected,
            self.sifted,
            self.double_clicks,
            self.errors_x,
            self.sifted_x,
            self.errors_y,
            self.sifted_y,
            self.bob_x,
            self.bob_x_inconclusive,
            self.bob_y,
            self.bob_y_inconclusive
        )
    }
}

/// Everything a round needs, precomputed per (label, Bob basis).
struct Setup {
    /// Photon-number distribution per `[label][bob basis][arm]`; `None` for
    /// an empty arm.
    arms: [[[Option<Poisson<f64>>; 2]; 2]; 4],
    det: DetectorParams,
    /// `(p(E0), p(E1))` per label, for the UKD attack.
    eve: Option<[[f64; 2]; 4]>,
    /// Probability that a resent photon lands on the wrong arm, per Bob basis,
    /// misalignment included.
    resend_wrong: [f64; 2],
    policy: DoubleClickPolicy,
}

fn basis_index(b: Basis) -> usize {
    match b {
        Basis::X => 0,
        Basis::Y => 1,
    }
}

fn label_index(l: SignalLabel) -> usize {
    SignalLabel::ALL
        .iter()
        .position(|&x| x == l)
        .expect("label in ALL")
}

fn normalized(v: [Complex64; 2]) -> [Complex64; 2] {
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    [v[0] / n, v[1] / n]
}

/// Qutrit signal index (`0_Z, 0_X, 1_Z, 1_X`) of a protocol label: the X and
/// Y bases of the protocol are the qutrit Z and X bases.
fn qutrit_index(l: SignalLabel) -> usize {
    match l {
        SignalLabel::ZeroX => 0,
        SignalLabel::ZeroY => 1,
        SignalLabel::OneX => 2,
        SignalLabel::OneY => 3,
    }
}

impl Setup {
    fn new(
        source: SourceVariant,
        chan: &ChannelParams,
        det: &DetectorParams,
        eve: EveStrategy,
    ) -> Result<Self> {
        det.validate()?;
        let mode_kind = match source.kind {
            VariantKind::BrightRef => VariantKind::UnmodulatedRef,
            k => k,
        };
        let modes = make_signal_set(SourceVariant::with_mu(mode_kind, 2.0, 1.0)?);
        let arm_mode = |basis: Basis, bit: u8| {
            let s = modes.state(SignalLabel::new(basis, bit));
            normalized([s.reference, s.signal])
        };

        let signals = make_signal_set(source);
        let scale = match source.bright_reference() {
            Some(b) => b.c_squared().sqrt(),
            None => 1.0,
        };
        let ref_scale = if source.kind == VariantKind::BrightRef && source.beta.norm() > 0.0 {
            source.alpha.norm() / source.beta.norm()
        } else {
            1.0
        };

        let t = chan.transmission();
        let e = det.e_align;
        let mut arms: [[[Option<Poisson<f64>>; 2]; 2]; 4] = Default::default();
        for label in SignalLabel::ALL {
            let s = signals.state(label);
            let a = [s.reference * ref_scale * scale, s.signal * scale];
            for (bi, basis) in [Basis::X, Basis::Y].into_iter().enumerate() {
                let mean = |bit: u8| {
                    let u = arm_mode(basis, bit);
                    (u[0].conj() * a[0] + u[1].conj() * a[1]).norm_sqr() * t
                };
                let (m0, m1) = (mean(0), mean(1));
                let mixed = [(1.0 - e) * m0 + e * m1, (1.0 - e) * m1 + e * m0];
                for k in 0..2 {
                    arms[label_index(label)][bi][k] = if mixed[k] > 0.0 {
                        Some(Poisson::new(mixed[k]).map_err(|err| {
                            Error::Unsupported(format!("arm mean {}: {err}", mixed[k]))
                        })?)
                    } else {
                        None
                    };
                }
            }
        }

        let eve_table = match eve {
            EveStrategy::None => None,
            EveStrategy::UkdInterceptResend => {
                if source.kind != VariantKind::ModulatedRef {
                    return Err(Error::Unsupported(
                        "UKD intercept/resend is defined for the modulated-reference source".into(),
                    ));
                }
                let q = ukd_signals(source.mu())?;
                let povm = ukd_povm(source.mu())?;
                let mut table = [[0.0; 2]; 4];
                for label in SignalLabel::ALL {
                    let p = povm.outcome_probs(&q[qutrit_index(label)]);
                    table[label_index(label)] = [p[0], p[1]];
                }
                Some(table)
            }
        };
        let resend_wrong = [true, false].map(|z| {
            let w = resend_wrong_prob(0, z);
            (1.0 - e) * w + e * (1.0 - w)
        });

        Ok(Self {
            arms,
            det: *det,
            eve: eve_table,
            resend_wrong,
            policy: DoubleClickPolicy::RandomBit,
        })
    }

    fn round(&self, rng: &mut ChaCha8Rng, tally: &mut RoundTally) {
        let alice_basis = if rng.random::<bool>() {
            Basis::Y
        } else {
            Basis::X
        };
        let bit = u8::from(rng.random::<bool>());
        let bob_basis = if rng.random::<bool>() {
            Basis::Y
        } else {
            Basis::X
        };
        let label = SignalLabel::new(alice_basis, bit);
        let (li, bi) = (label_index(label), basis_index(bob_basis));
        let xi = self.det.xi;

        let mut light = [false; 2];
        match &self.eve {
            None => {
                for (k, arm) in self.arms[li][bi].iter().enumerate() {
                    if let Some(dist) = arm {
                        let n = dist.sample(rng) as i32;
                        light[k] = n > 0 && rng.random::<f64>() < 1.0 - (1.0 - xi).powi(n);
                    }
                }
            }
            Some(table) => {
                let [p0, p1] = table[li];
                let u: f64 = rng.random();
                let eve_bit = if u < p0 {
                    Some(0u8)
                } else if u < p0 + p1 {
                    Some(1u8)
                } else {
                    None
                };
                if let Some(b) = eve_bit {
                    if rng.random::<f64>() < xi {
                        let wrong = rng.random::<f64>() < self.resend_wrong[bi];
                        let arm = if wrong { 1 - b } else { b };
                        light[usize::from(arm)] = true;
                    }
                }
            }
        }

        let mut click = [false; 2];
        for k in 0..2 {
            click[k] = light[k] || rng.random::<f64>() < self.det.dark(k as u8);
        }

        tally.sent += 1;
        let (measured, inconclusive) = match bob_basis {
            Basis::X => (&mut tally.bob_x, &mut tally.bob_x_inconclusive),
            Basis::Y => (&mut tally.bob_y, &mut tally.bob_y_inconclusive),
        };
        *measured += 1;
        let bob_bit = match click {
            [false, false] => {
                *inconclusive += 1;
                return;
            }
            [true, false] => 0u8,
            [false, true] => 1u8,
            [true, true] => {
                tally.double_clicks += 1;
                match self.policy {
                    DoubleClickPolicy::RandomBit => u8::from(rng.random::<bool>()),
                    DoubleClickPolicy::Fixed(b) => b,
                }
            }
        };
        tally.detected += 1;
        if alice_basis != bob_basis {
            return;
        }
        tally.sifted += 1;
        let err = u64::from(bob_bit != bit);
        match alice_basis {
            Basis::X => {
                tally.sifted_x += 1;
                tally.errors_x += err;
            }
            Basis::Y => {
                tally.sifted_y += 1;
                tally.errors_y += err;
            }
        }
    }

    fn run_range(&self, base: &ChaCha8Rng, range: std::ops::Range<u64>) -> RoundTally {
        let mut tally = RoundTally::default();
        for round in range {
            let mut rng = base.clone();
            rng.set_stream(round);
            self.round(&mut rng, &mut tally);
        }
        tally
    }
}

const CHUNK: u64 = 1 << 14;

fn prepare(
    n_rounds: u64,
    source: SourceVariant,
    chan: &ChannelParams,
    det: &DetectorParams,
    eve: EveStrategy,
) -> Result<Setup> {
    if n_rounds == 0 {
        return Err(Error::OutOfRange {
            name: "n_rounds",
            value: 0.0,
            range: "[1, inf)",
        });
    }
    Setup::new(source, chan, det, eve)
}

/// Simulates `n_rounds` rounds in parallel. The result depends only on the
/// inputs and `seed`.
pub fn run_protocol(
    n_rounds: u64,
    source: SourceVariant,
    chan: &ChannelParams,
    det: &DetectorParams,
    eve: EveStrategy,
    seed: u64,
) -> Result<RoundTally> {
    let setup = prepare(n_rounds, source, chan, det, eve)?;
    let base = ChaCha8Rng::seed_from_u64(seed);
    let chunks = n_rounds.div_ceil(CHUNK);
    Ok((0..chunks)
        .into_par_iter()
        .map(|c| setup.run_range(&base, c * CHUNK..((c + 1) * CHUNK).min(n_rounds)))
        .reduce(RoundTally::default, |a, b| a.merge(&b)))
}

/// Single-threaded reference for [`run_protocol`].
pub fn run_protocol_serial(
    n_rounds: u64,
    source: SourceVariant,
    chan: &ChannelParams,
    det: &DetectorParams,
    eve: EveStrategy,
    seed: u64,
) -> Result<RoundTally> {
    let setup = prepare(n_rounds, source, chan, det, eve)?;
    let base = ChaCha8Rng::seed_from_u64(seed);
    Ok(setup.run_range(&base, 0..n_rounds))
}

/// A proportion with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

impl Estimate {
    fn proportion(k: u64, n: u64) -> Self {
        let p = k as f64 / n as f64;
        Self {
            value: p,
            std_err: (p * (1.0 - p) / n as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRates {
    pub delta_x: Estimate,
    pub delta_y: Estimate,
    /// Detected fraction of sent rounds.
    pub q_hat: Estimate,
}

/// Per-basis sifted error rates and the detection fraction.
pub fn estimate_error_rates(tally: &RoundTally) -> Result<ErrorRates> {
    if tally.sifted_x == 0 {
        return Err(Error::EmptyStratum("x"));
    }
    if tally.sifted_y == 0 {
        return Err(Error::EmptyStratum("y"));
    }
    Ok(ErrorRates {
        delta_x: Estimate::proportion(tally.errors_x, tally.sifted_x),
        delta_y: Estimate::proportion(tally.errors_y, tally.sifted_y),
        q_hat: Estimate::proportion(tally.detected, tally.sent),
    })
}

/// Analytic detection probability and sifted error rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expected {
    pub q: f64,
    pub e: f64,
}

/// What a run of [`run_protocol`] should average to.
pub fn expected_stats(
    source: SourceVariant,
    chan: &ChannelParams,
    det: &DetectorParams,
    eve: EveStrategy,
) -> Result<Expected> {
    let policy = DoubleClickPolicy::RandomBit;
    let mu = source.mu();
    match eve {
        EveStrategy::None => {
            let bright = source.bright_reference();
            let q = detection_prob(mu, chan, det, bright);
            let e = if q > 0.0 {
                intrinsic_error_rate(mu, chan, det, bright, policy)?
            } else {
                0.0
            };
            Ok(Expected { q, e })
        }
        EveStrategy::UkdInterceptResend => {
            let wrong = resend_wrong_prob(0, true);
            let photon = LightClicks::single_photon(det.xi, wrong, det.e_align);
            let dark_only = LightClicks::coherent(0.0, 0.0);
            let (mut q, mut err) = (0.0, 0.0);
            for bit in 0..2 {
                let pc = conclusive_prob(bit, mu)?;
                let (q1, e1) = conclusive_stats(photon, det, bit, policy);
                let (q0, e0) = conclusive_stats(dark_only, det, bit, policy);
                q += 0.5 * (pc * q1 + (1.0 - pc) * q0);
                err += 0.5 * (pc * e1 + (1.0 - pc) * e0);
            }
            Ok(Expected {
                q,
                e: if q > 0.0 { err / q } else { 0.0 },
            })
        }
    }
}

/// Standard scores of the observed detection fraction and pooled sifted error
/// rate against `expected`, using the expected binomial variance.
pub fn z_scores(tally: &RoundTally, expected: &Expected) -> (f64, f64) {
    let z = |k: u64, n: u64, p: f64| {
        if n == 0 {
            return 0.0;
        }
        let obs = k as f64 / n as f64;
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        if sd > 0.0 {
            (obs - p) / sd
        } else if obs == p {
            0.0
        } else {
            f64::INFINITY
        }
    };
    (
        z(tally.detected, tally.sent, expected.q),
        z(tally.errors_x + tally.errors_y, tally.sifted, expected.e),
    )
}

/// Outcome of one Bloch-sphere bound trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochCheck {
    pub gamma_x: f64,
    pub gamma_z: f64,
    /// `(1−2γ_x)² + (1−2γ_z)²`.
    pub lhs: f64,
    /// `1 + 5√(ln n / n)`.
    pub bound: f64,
    pub holds: bool,
}

/// Measures `n` copies of the qubit with Bloch vector `bloch` in x and `n`
/// in z, counting outcome 1 as an error in each basis.
pub fn bloch_bound_check(n: u64, bloch: [f64; 3], seed: u64) -> Result<BlochCheck> {
    if n < 1000 {
        return Err(Error::OutOfRange {
            name: "n",
            value: n as f64,
            range: "[1000, inf)",
        });
    }
    let r2: f64 = bloch.iter().map(|c| c * c).sum();
    if r2 > 1.0 + 1e-12 {
        return Err(Error::OutOfRange {
            name: "|bloch|",
            value: r2.sqrt(),
            range: "[0, 1]",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = |c: f64| -> Result<f64> {
        let p = ((1.0 - c) / 2.0).clamp(0.0, 1.0);
        let k = Binomial::new(n, p)
            .map_err(|e| Error::Unsupported(e.to_string()))?
            .sample(&mut rng);
        Ok(k as f64 / n as f64)
    };
    let gamma_x = sample(bloch[0])?;
    let gamma_z = sample(bloch[2])?;
    let lhs = (1.0 - 2.0 * gamma_x).powi(2) + (1.0 - 2.0 * gamma_z).powi(2);
    let nf = n as f64;
    let bound = 1.0 + 5.0 * (nf.ln() / nf).sqrt();
    Ok(BlochCheck {
        gamma_x,
        gamma_z,
        lhs,
        bound,
        holds: lhs <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alpha(mu: f64) -> Complex64 {
        Complex64::new((mu / 2.0).sqrt(), 0.0)
    }

    #[test]
    fn seeded_runs_repeat() {
        let s = SourceVariant::unmodulated(alpha(0.3));
        let chan = ChannelParams::new(0.21, 5.0).unwrap();
        let det = DetectorParams::new(1e-3, 2e-3, 0.3, 0.05).unwrap();
        let a = run_protocol(50_000, s, &chan, &det, EveStrategy::None, 7).unwrap();
        let b = run_protocol(50_000, s, &chan, &det, EveStrategy::None, 7).unwrap();
        let c = run_protocol_serial(50_000, s, &chan, &det, EveStrategy::None, 7).unwrap();
        let d = run_protocol(50_000, s, &chan, &det, EveStrategy::None, 8).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_ne!(a, d);
        assert!(a.is_consistent());
    }

    #[test]
    fn perfect_matched_rounds_have_no_errors() {
        let det = DetectorParams::new(0.0, 0.0, 0.6, 0.0).unwrap();
        for s in [
            SourceVariant::unmodulated(alpha(0.5)),
            SourceVariant::modulated(alpha(0.5)),
            SourceVariant::with_mu(VariantKind::BrightRef, 0.5, 50.0).unwrap(),
        ] {
            let t = run_protocol(
                40_000,
                s,
                &ChannelParams::lossless(),
                &det,
                EveStrategy::None,
                1,
            )
            .unwrap();
            assert!(t.sifted > 1000);
            assert_eq!(t.errors_x + t.errors_y, 0, "{:?}", s.kind);
            assert_eq!(t.double_clicks, t.double_clicks.min(t.detected));
        }
    }

    #[test]
    fn ideal_detection_fraction() {
        let mu = 0.4;
        let t = run_protocol(
            200_000,
            SourceVariant::unmodulated(alpha(mu)),
            &ChannelParams::lossless(),
            &DetectorParams::ideal(),
            EveStrategy::None,
            3,
        )
        .unwrap();
        let p = 1.0 - (-mu).exp();
        let sd = (p * (1.0 - p) / t.sent as f64).sqrt();
        assert!((t.detected as f64 / t.sent as f64 - p).abs() < 3.0 * sd);
    }

    #[test]
    fn ukd_needs_modulated_reference() {
        let r = run_protocol(
            100,
            SourceVariant::unmodulated(alpha(0.02)),
            &ChannelParams::lossless(),
            &DetectorParams::ideal(),
            EveStrategy::UkdInterceptResend,
            0,
        );
        assert!(matches!(r, Err(Error::Unsupported(_))));
        assert!(run_protocol(
            0,
            SourceVariant::unmodulated(alpha(0.02)),
            &ChannelParams::lossless(),
            &DetectorParams::ideal(),
            EveStrategy::None,
            0
        )
        .is_err());
    }

    #[test]
    fn estimates() {
        let t = RoundTally {
            sent: 1000,
            detected: 200,
            sifted: 200,
            errors_x: 10,
            sifted_x: 100,
            errors_y: 0,
            sifted_y: 100,
            ..Default::default()
        };
        let r = estimate_error_rates(&t).unwrap();
        assert!((r.delta_x.value - 0.1).abs() < 1e-15);
        assert!((r.delta_x.std_err - 0.03).abs() < 1e-15);
        assert_eq!(r.delta_y.value, 0.0);
        assert!((r.q_hat.value - 0.2).abs() < 1e-15);
        let empty = RoundTally { sifted_y: 0, ..t };
        assert_eq!(estimate_error_rates(&empty), Err(Error::EmptyStratum("y")));
    }

    #[test]
    fn tally_csv() {
        let mut buf = Vec::new();
        RoundTally {
            sent: 3,
            ..Default::default()
        }
        .write_csv(&mut buf)
        .unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 2);
        assert!(s.lines().nth(1).unwrap().starts_with("3,0,"));
    }

    #[test]
    fn bloch_trivial_states() {
        let c = bloch_bound_check(100_000, [0.0, 0.0, 1.0], 1).unwrap();
        assert_eq!(c.gamma_z, 0.0);
        assert!((c.gamma_x - 0.5).abs() < 0.01);
        assert!((c.lhs - 1.0).abs() < 0.01 && c.holds);
        let c = bloch_bound_check(100_000, [0.0, 0.0, 0.0], 2).unwrap();
        assert!(c.lhs < 0.01 && c.holds);
        assert!(bloch_bound_check(10, [0.0; 3], 0).is_err());
        assert!(bloch_bound_check(1000, [1.0, 0.0, 1.0], 0).is_err());
    }
}
