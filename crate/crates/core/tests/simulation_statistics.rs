use num_complex::Complex64;
use qkd_core::detection::{detection_prob, ChannelParams, DetectorParams};
use qkd_core::protosim::{
    bloch_bound_check, estimate_error_rates, expected_stats, run_protocol, z_scores, EveStrategy,
};
use qkd_core::{SourceVariant, SystemParams, VariantKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn detection_fraction_matches_analytic_q() {
    let params = SystemParams::gys_like();
    let chan = params.channel(10.0);
    for (i, mu) in [0.05, 0.1, 0.5].into_iter().enumerate() {
        let s = SourceVariant::with_mu(VariantKind::UnmodulatedRef, mu, 1.0).unwrap();
        let t = run_protocol(
            1_000_000,
            s,
            &chan,
            &params.detector,
            EveStrategy::None,
            i as u64,
        )
        .unwrap();
        let q = detection_prob(mu, &chan, &params.detector, None);
        let sd = (q * (1.0 - q) / t.sent as f64).sqrt();
        let q_hat = t.detected as f64 / t.sent as f64;
        assert!((q_hat - q).abs() < 4.0 * sd, "mu={mu}: {q_hat} vs {q}");
    }
}

#[test]
fn error_rate_matches_intrinsic_model() {
    let det = DetectorParams::new(2e-3, 1e-3, 0.2, 0.04).unwrap();
    let chan = ChannelParams::new(0.2, 10.0).unwrap();
    for kind in [
        VariantKind::UnmodulatedRef,
        VariantKind::ModulatedRef,
        VariantKind::BrightRef,
    ] {
        let s = SourceVariant::with_mu(kind, 0.4, 30.0).unwrap();
        let t = run_protocol(400_000, s, &chan, &det, EveStrategy::None, 17).unwrap();
        let exp = expected_stats(s, &chan, &det, EveStrategy::None).unwrap();
        let (zq, ze) = z_scores(&t, &exp);
        assert!(
            zq.abs() < 4.0 && ze.abs() < 3.0,
            "{kind:?}: zq={zq} ze={ze}"
        );
        let r = estimate_error_rates(&t).unwrap();
        assert!((r.delta_x.value - exp.e).abs() < 4.0 * r.delta_x.std_err);
        assert!((r.delta_y.value - exp.e).abs() < 4.0 * r.delta_y.std_err);
    }
}

#[test]
fn inconclusive_fraction_independent_of_bob_basis() {
    let params = SystemParams::gys_like();
    let s = SourceVariant::with_mu(VariantKind::ModulatedRef, 0.8, 1.0).unwrap();
    let t = run_protocol(
        1_000_000,
        s,
        &params.channel(0.0),
        &params.detector,
        EveStrategy::None,
        4,
    )
    .unwrap();
    let px = t.bob_x_inconclusive as f64 / t.bob_x as f64;
    let py = t.bob_y_inconclusive as f64 / t.bob_y as f64;
    let p = (t.bob_x_inconclusive + t.bob_y_inconclusive) as f64 / t.sent as f64;
    let sd = (p * (1.0 - p) * (1.0 / t.bob_x as f64 + 1.0 / t.bob_y as f64)).sqrt();
    assert!((px - py).abs() < 4.0 * sd, "{px} vs {py}");
}

#[test]
fn ukd_attack_statistics() {
    let det = DetectorParams::new(1e-4, 1e-4, 0.5, 0.0).unwrap();
    let s = SourceVariant::modulated(Complex64::new(0.1, 0.0));
    let exp = expected_stats(
        s,
        &ChannelParams::lossless(),
        &det,
        EveStrategy::UkdInterceptResend,
    )
    .unwrap();
    let t = run_protocol(
        1_000_000,
        s,
        &ChannelParams::lossless(),
        &det,
        EveStrategy::UkdInterceptResend,
        9,
    )
    .unwrap();
    let (zq, ze) = z_scores(&t, &exp);
    assert!(zq.abs() < 3.0 && ze.abs() < 3.0, "zq={zq} ze={ze}");
    assert!(t.is_consistent());
}

#[test]
fn bloch_bound_holds_for_random_pure_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..200 {
        let v: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        let bloch = v.map(|c| c / n);
        let c = bloch_bound_check(100_000, bloch, trial).unwrap();
        assert!(c.holds, "trial {trial}: {c:?}");
    }
}
