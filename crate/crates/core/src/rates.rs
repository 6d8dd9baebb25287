//! Phase-error bound, secret-key rates and their optimisation over μ and
//! distance.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::detection::{
    detection_prob, intrinsic_error_rate, BrightReference, ChannelParams, DoubleClickPolicy,
};
use crate::error::{check_range, Error, Result};
use crate::params::SystemParams;
use crate::qmath::h2;
use crate::source::{coin_imbalance, effective_imbalance, multiphoton_prob};
use crate::tolerances;

/// Upper bound on the phase error rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseErrorBound {
    /// Raw bound; may exceed ½.
    pub value: f64,
    /// True when the raw bound exceeds ½, i.e. no key can be distilled.
    pub saturated: bool,
}

impl PhaseErrorBound {
    fn new(value: f64) -> Self {
        Self {
            value,
            saturated: value > 0.5,
        }
    }

    /// The bound capped at ½, as used in entropy terms.
    pub fn capped(&self) -> f64 {
        self.value.min(0.5)
    }
}

/// `δ′ = δ + 4Δ′(1−Δ′)(1−2δ) + 4(1−2Δ′)√(Δ′(1−Δ′)δ(1−δ)) + ε`.
///
/// Expects `δ, Δ′ ∈ [0, ½]`.
pub fn phase_error_closed(delta: f64, delta_prime: f64, epsilon: f64) -> PhaseErrorBound {
    debug_assert!((0.0..=0.5).contains(&delta) && (0.0..=0.5).contains(&delta_prime));
    let (d, dp) = (delta, delta_prime);
    let value = d
        + 4.0 * dp * (1.0 - dp) * (1.0 - 2.0 * d)
        + 4.0 * (1.0 - 2.0 * dp) * (dp * (1.0 - dp) * d * (1.0 - d)).sqrt()
        + epsilon;
    PhaseErrorBound::new(value)
}

/// Largest `δ′ ∈ [δ, 1]` with `√(δδ′) + √((1−δ)(1−δ′)) ≥ 1 − 2Δ′`, by
/// bisection.
///
/// Writing the left side as `√(1 − D²)` with
/// `D(x) = √((1−δ)x) − √(δ(1−x)) = (x − δ)/(√((1−δ)x) + √(δ(1−x)))`, the
/// condition becomes `D(δ′) ≤ 2√(Δ′(1−Δ′))`. `D` rises monotonically from 0 at
/// `δ′ = δ`, so the admissible set is an interval and its right end is a
/// simple root (the original form has a double root at Δ′ = 0). If the
/// condition still holds at `δ′ = 1` the bound is 1.
pub fn phase_error_numeric(delta: f64, delta_prime: f64) -> PhaseErrorBound {
    debug_assert!((0.0..=0.5).contains(&delta) && (0.0..0.5).contains(&delta_prime));
    let limit = 2.0 * (delta_prime * (1.0 - delta_prime)).sqrt();
    let d = |x: f64| {
        let den = ((1.0 - delta) * x).sqrt() + (delta * (1.0 - x)).sqrt();
        if den > 0.0 {
            (x - delta) / den
        } else {
            0.0
        }
    };
    if d(1.0) <= limit {
        return PhaseErrorBound::new(1.0);
    }
    let (mut lo, mut hi) = (delta, 1.0);
    while hi - lo > tolerances::BISECTION {
        let mid = 0.5 * (lo + hi);
        if d(mid) <= limit {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    PhaseErrorBound::new(0.5 * (lo + hi))
}

/// `R = 1 − H(δ_x) − H(δ_y′)` per sifted bit.
pub fn rate_r(delta_x: f64, delta_y: f64, delta_prime: f64) -> f64 {
    1.0 - h2(delta_x) - h2(phase_error_closed(delta_y, delta_prime, 0.0).capped())
}

/// `δ_p = δ + Δ′/2`: phase error allowed when a fraction Δ′ of the signals
/// is tagged.
pub fn tagged_phase_error(delta: f64, delta_prime: f64) -> f64 {
    delta + delta_prime / 2.0
}

/// Imbalance Δ′ at which `R(0, 0, Δ′) = 0`.
///
/// H is flat at ½, so the root is resolved only to about 1e-8.
pub fn zero_error_threshold() -> f64 {
    let f = |dp: f64| 1.0 - h2(phase_error_closed(0.0, dp, 0.0).capped());
    let (mut lo, mut hi) = (0.0, 0.25);
    while hi - lo > tolerances::BISECTION {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest μ at which an unmodulated-reference source with ideal detectors
/// and overall transmission η still has `Δ/Q` below [`zero_error_threshold`].
pub fn nonrandom_mu_threshold(eta: f64) -> f64 {
    let star = zero_error_threshold();
    let f = |mu: f64| coin_imbalance(mu) / -(-eta * mu).exp_m1() - star;
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    while hi - lo > tolerances::BISECTION * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateInputs {
    /// Detection probability per pulse.
    pub q: f64,
    /// Observed bit error rate.
    pub e: f64,
    pub delta_prime: f64,
    pub f_ec: f64,
    pub epsilon: f64,
}

impl RateInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(Error::OutOfRange {
                name: "Q",
                value: self.q,
                range: "(0, 1]",
            });
        }
        check_range("e", self.e, 0.0, 0.5, "[0, 0.5]")?;
        check_range("delta_prime", self.delta_prime, 0.0, 0.5, "[0, 0.5]")?;
        check_range("f_ec", self.f_ec, 1.0, f64::MAX, "[1, inf)")?;
        check_range("epsilon", self.epsilon, 0.0, 0.5, "[0, 0.5]")?;
        Ok(())
    }
}

/// Key bits per pulse, clamped at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gain {
    pub g: f64,
    /// Phase error rate entering privacy amplification.
    pub e_ph: f64,
    /// The unclamped gain was not positive.
    pub insecure: bool,
}

impl Gain {
    fn clamped(raw: f64, e_ph: f64) -> Self {
        if raw > 0.0 {
            Self {
                g: raw,
                e_ph,
                insecure: false,
            }
        } else {
            Self {
                g: 0.0,
                e_ph,
                insecure: true,
            }
        }
    }
}

/// `G = ½Q(1 − f·H(e) − H(e_ph))` for a source whose phase is not randomized.
pub fn gain_nonrandom(inputs: &RateInputs) -> Gain {
    let e_ph = phase_error_closed(inputs.e, inputs.delta_prime, inputs.epsilon).capped();
    let raw = 0.5 * inputs.q * (1.0 - inputs.f_ec * h2(inputs.e) - h2(e_ph));
    Gain::clamped(raw, e_ph)
}

/// `G = ½(Q₁(1 − H(e₁)) − Q·f·H(e))` for phase-randomized signals.
///
/// All multi-photon detections are treated as tagged: `Δ′ = p_M/Q`,
/// `Q₁ = Q(1−Δ′)` and `e₁ = e/(1−Δ′)`. The returned `e_ph` is `e₁`.
pub fn gain_random(q: f64, e: f64, mu: f64, f_ec: f64) -> Gain {
    let tagged = multiphoton_prob(mu) / q;
    if !(tagged < 1.0) {
        return Gain {
            g: 0.0,
            e_ph: 0.5,
            insecure: true,
        };
    }
    let e1 = (e / (1.0 - tagged)).min(0.5);
    let q1 = q * (1.0 - tagged);
    let raw = 0.5 * (q1 * (1.0 - h2(e1)) - q * f_ec * h2(e));
    Gain::clamped(raw, e1)
}

/// Which rate formula applies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceKind {
    /// Equal-strength reference pulse with a phase known to the eavesdropper.
    Nonrandom,
    /// Phase-randomized signals.
    Random,
    /// Bright reference with `|β|²/|α|² = ratio`.
    Bright { ratio: f64 },
}

impl SourceKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Nonrandom => "nonrandom",
            Self::Random => "random",
            Self::Bright { .. } => "bright",
        }
    }

    fn bright_reference(&self) -> Option<BrightReference> {
        match *self {
            Self::Bright { ratio } => Some(BrightReference {
                intensity_ratio: ratio,
            }),
            _ => None,
        }
    }
}

/// One operating point of a rate curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub distance_km: f64,
    pub mu: f64,
    pub q: f64,
    pub e: f64,
    /// Δ′ for coherent sources, tagged fraction `p_M/Q` for random phases.
    pub delta_prime: f64,
    pub e_ph: f64,
    /// Key bits per pulse, never negative.
    pub g: f64,
    pub insecure: bool,
}

/// Rate of `kind` at a given μ and distance.
pub fn evaluate_point(
    kind: SourceKind,
    mu: f64,
    distance_km: f64,
    params: &SystemParams,
) -> Result<RatePoint> {
    check_range("mu", mu, 0.0, f64::MAX, "[0, inf)")?;
    let chan = ChannelParams::new(params.loss_db_per_km, distance_km)?;
    let det = &params.detector;
    let bright = kind.bright_reference();
    let q = detection_prob(mu, &chan, det, bright);
    if !(q > 0.0) {
        return Ok(RatePoint {
            distance_km,
            mu,
            q,
            e: 0.5,
            delta_prime: 0.5,
            e_ph: 0.5,
            g: 0.0,
            insecure: true,
        });
    }
    let e = intrinsic_error_rate(mu, &chan, det, bright, DoubleClickPolicy::RandomBit)?;
    let (delta_prime, gain) = match kind {
        SourceKind::Random => (multiphoton_prob(mu) / q, gain_random(q, e, mu, params.f_ec)),
        SourceKind::Nonrandom | SourceKind::Bright { .. } => {
            let dp = effective_imbalance(coin_imbalance(mu), q)?.value;
            let gain = gain_nonrandom(&RateInputs {
                q,
                e,
                delta_prime: dp,
                f_ec: params.f_ec,
                epsilon: params.epsilon,
            });
            (dp, gain)
        }
    };
    Ok(RatePoint {
        distance_km,
        mu,
        q,
        e,
        delta_prime,
        e_ph: gain.e_ph,
        g: gain.g,
        insecure: gain.insecure,
    })
}

const GRID_POINTS: usize = 200;
const MU_MAX: f64 = 1.0;

/// μ search interval `[min(1e-6, 10⁻³·η), 1]`.
///
/// The lower end follows η so that far-distance curves, whose optimum sits
/// near μ ~ η for coherent sources, stay on the grid.
pub fn mu_search_range(distance_km: f64, params: &SystemParams) -> (f64, f64) {
    let eta = params.detector.xi * params.channel(distance_km).transmission();
    ((1e-3 * eta).clamp(f64::MIN_POSITIVE, 1e-6), MU_MAX)
}

/// Maximizes G over μ on a 200-point log grid, then refines around the best
/// grid point by golden-section search in log μ.
///
/// When no grid point is secure, returns a zero-gain point with μ = 0 and the
/// insecure flag set.
pub fn optimize_mu(kind: SourceKind, distance_km: f64, params: &SystemParams) -> Result<RatePoint> {
    let (lo, hi) = mu_search_range(distance_km, params);
    let (llo, lhi) = (lo.ln(), hi.ln());
    let step = (lhi - llo) / (GRID_POINTS - 1) as f64;
    let log_mu = |i: usize| {
        if i + 1 == GRID_POINTS {
            lhi
        } else {
            llo + step * i as f64
        }
    };

    let mut best_i = 0;
    let mut best = evaluate_point(kind, log_mu(0).exp(), distance_km, params)?;
    for i in 1..GRID_POINTS {
        let p = evaluate_point(kind, log_mu(i).exp(), distance_km, params)?;
        if p.g > best.g {
            best = p;
            best_i = i;
        }
    }
    if !(best.g > 0.0) {
        let mut p = evaluate_point(kind, 0.0, distance_km, params)?;
        p.g = 0.0;
        p.insecure = true;
        return Ok(p);
    }

    let gain = |x: f64| evaluate_point(kind, x.exp(), distance_km, params).map(|p| p.g);
    let mut a = log_mu(best_i.saturating_sub(1));
    let mut b = log_mu((best_i + 1).min(GRID_POINTS - 1));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut gc, mut gd) = (gain(c)?, gain(d)?);
    while b - a > 1e-10 {
        if gc >= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = gain(c)?;
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = gain(d)?;
        }
    }
    let refined = evaluate_point(kind, (0.5 * (a + b)).exp(), distance_km, params)?;
    Ok(if refined.g > best.g { refined } else { best })
}

/// Number of rows in a sweep, `⌊(d_max − d_min)/step⌋ + 1`.
///
/// A relative slack of 1e-9 keeps decimal steps such as 0.1 from losing the
/// last row to rounding.
pub fn sweep_len(d_min: f64, d_max: f64, step: f64) -> Result<usize> {
    check_range("d_min", d_min, 0.0, f64::MAX, "[0, inf)")?;
    check_range("d_max", d_max, d_min, f64::MAX, "[d_min, inf)")?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::OutOfRange {
            name: "step",
            value: step,
            range: "(0, inf)",
        });
    }
    Ok(((d_max - d_min) / step * (1.0 + 1e-9)).floor() as usize + 1)
}

/// Optimized rate at each distance `d_min + i·step`.
///
/// Points are evaluated in parallel and returned in distance order. Any rise
/// of G with distance is logged as a warning.
pub fn sweep_distance(
    kind: SourceKind,
    d_min: f64,
    d_max: f64,
    step: f64,
    params: &SystemParams,
) -> Result<Vec<RatePoint>> {
    let n = sweep_len(d_min, d_max, step)?;
    let points = (0..n)
        .into_par_iter()
        .map(|i| optimize_mu(kind, d_min + step * i as f64, params))
        .collect::<Result<Vec<_>>>()?;
    for w in points.windows(2) {
        if w[1].g > w[0].g * (1.0 + 1e-9) {
            log::warn!(
                "{} rate rises from {:.6e} at {} km to {:.6e} at {} km",
                kind.name(),
                w[0].g,
                w[0].distance_km,
                w[1].g,
                w[1].distance_km
            );
        }
    }
    Ok(points)
}

/// Upper end of the distance search.
pub const DISTANCE_CAP_KM: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxDistance {
    pub distance_km: f64,
    /// The curve is still secure at [`DISTANCE_CAP_KM`].
    pub capped: bool,
}

/// Largest distance with positive optimized gain, bisected to 0.1 km.
pub fn max_secure_distance(kind: SourceKind, params: &SystemParams) -> Result<MaxDistance> {
    let secure = |d: f64| optimize_mu(kind, d, params).map(|p| p.g > 0.0);
    if !secure(0.0)? {
        return Ok(MaxDistance {
            distance_km: 0.0,
            capped: false,
        });
    }
    if secure(DISTANCE_CAP_KM)? {
        return Ok(MaxDistance {
            distance_km: DISTANCE_CAP_KM,
            capped: true,
        });
    }
    let (mut lo, mut hi) = (0.0, DISTANCE_CAP_KM);
    while hi - lo > 0.1 {
        let mid = 0.5 * (lo + hi);
        if secure(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(MaxDistance {
        distance_km: lo,
        capped: false,
    })
}

pub const CSV_HEADER: &str = "distance_km,mu,Q,e,delta_prime,e_ph,G";

/// Writes the header and one row per point, 10 significant digits.
pub fn write_csv<W: Write>(mut out: W, points: &[RatePoint]) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for p in points {
        writeln!(
            out,
            "{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
            p.distance_km, p.mu, p.q, p.e, p.delta_prime, p.e_ph, p.g
        )?;
    }
    Ok(())
}
