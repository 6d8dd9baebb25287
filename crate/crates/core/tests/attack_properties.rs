use qkd_core::attack::{conclusive_prob, conclusive_prob_matrix, ukd_povm, ukd_signals};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn closed_form_matches_matrices_on_random_mu() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let mu: f64 = rng.random_range(0.0..0.5);
        for bit in 0..2 {
            let c = conclusive_prob(bit, mu).unwrap();
            let m = conclusive_prob_matrix(bit, mu).unwrap();
            assert!((c - m).abs() < 1e-12);
        }
    }
}

#[test]
fn never_misidentifies() {
    for k in 0..=100 {
        let mu = 0.005 * k as f64;
        let povm = ukd_povm(mu).unwrap();
        let s = ukd_signals(mu).unwrap();
        for i in [0, 1] {
            assert!(povm.e1.expectation(s[i].as_slice()).unwrap().norm() < 1e-12);
            assert_eq!(
                povm.outcome_probs(&s[i])[1],
                0.0_f64.max(povm.outcome_probs(&s[i])[1])
            );
        }
        for i in [2, 3] {
            assert!(povm.e0.expectation(s[i].as_slice()).unwrap().norm() < 1e-12);
        }
    }
}

#[test]
fn conclusive_rate_vanishes_linearly() {
    let slope = 0.5 - 0.5 * std::f64::consts::FRAC_1_SQRT_2;
    let mut prev_gap = f64::INFINITY;
    for e in 1..=8 {
        let mu = 10f64.powi(-e);
        let gap = (conclusive_prob(1, mu).unwrap() / mu - slope).abs();
        assert!(gap < prev_gap);
        prev_gap = gap;
    }
    assert!(prev_gap < 1e-8);
}
