use proptest::prelude::*;
use qkd_core::qmath::{fidelity, random, statistical_overlap, trace_distance, SmallMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(
    seed: u64,
    dim: usize,
    rank_a: usize,
    rank_b: usize,
    outcomes: usize,
) -> (SmallMatrix, SmallMatrix, Vec<SmallMatrix>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho = random::density_matrix(dim, rank_a.min(dim), &mut rng);
    let sigma = random::density_matrix(dim, rank_b.min(dim), &mut rng);
    let povm = random::povm(dim, outcomes, &mut rng);
    (rho, sigma, povm)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn trace_distance_below_fidelity_bound(seed in any::<u64>(), dim in 2usize..=5, ra in 1usize..=5, rb in 1usize..=5) {
        let (rho, sigma, _) = instance(seed, dim, ra, rb, 2);
        let f = fidelity(&rho, &sigma).unwrap();
        let d = trace_distance(&rho, &sigma).unwrap();
        prop_assert!(d <= (1.0 - f).sqrt() + 1e-9, "D={d} F={f}");
        prop_assert!(1.0 - f.sqrt() <= d + 1e-9, "D={d} F={f}");
    }

    #[test]
    fn root_fidelity_below_statistical_overlap(seed in any::<u64>(), dim in 2usize..=4, ra in 1usize..=4, rb in 1usize..=4, outcomes in 2usize..=6) {
        let (rho, sigma, povm) = instance(seed, dim, ra, rb, outcomes);
        let f = fidelity(&rho, &sigma).unwrap();
        let so = statistical_overlap(&rho, &sigma, &povm).unwrap();
        prop_assert!(f.sqrt() <= so + 1e-9, "sqrt F={} overlap={so}", f.sqrt());
    }

    #[test]
    fn fidelity_symmetric(seed in any::<u64>(), dim in 2usize..=4) {
        let (rho, sigma, _) = instance(seed, dim, dim, 1, 2);
        let a = fidelity(&rho, &sigma).unwrap();
        let b = fidelity(&sigma, &rho).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn pure_states_saturate_trace_distance_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let a = random::pure_state(3, &mut rng);
        let b = random::pure_state(3, &mut rng);
        let rho = SmallMatrix::pure_state(&a).unwrap();
        let sigma = SmallMatrix::pure_state(&b).unwrap();
        let f = fidelity(&rho, &sigma).unwrap();
        let d = trace_distance(&rho, &sigma).unwrap();
        assert!((d - (1.0 - f).sqrt()).abs() < 1e-9);
    }
}
