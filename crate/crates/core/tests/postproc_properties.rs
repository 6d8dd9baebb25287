use proptest::prelude::*;
use qkd_core::postproc::{extract_key, parse_pa, sample_pa_matrices, serialize_pa, BitVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn key_columns_span_the_orthogonal_complement() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let n = rng.random_range(2..=64usize);
        let k = rng.random_range(1..n);
        let (g, h) = sample_pa_matrices(n, k, rng.random()).unwrap();
        assert!(g.transpose().mul(&h).unwrap().is_zero());
        assert_eq!(g.rank(), k);
        assert_eq!(h.rank(), n - k);
        // null space of H^T has dimension k and contains every column of G
        let ns = h.transpose().null_space();
        assert_eq!(ns.len(), k);
        for j in 0..k {
            let col = g.column(j);
            for c in 0..h.cols() {
                assert!(!col.dot(&h.column(c)));
            }
        }
    }
}

#[test]
fn matrices_are_seed_deterministic() {
    assert_eq!(
        sample_pa_matrices(32, 12, 5).unwrap(),
        sample_pa_matrices(32, 12, 5).unwrap()
    );
    assert_ne!(
        sample_pa_matrices(32, 12, 5).unwrap(),
        sample_pa_matrices(32, 12, 6).unwrap()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn extraction_is_linear(seed in any::<u64>(), n in 2usize..=80, frac in 0.01..0.99f64) {
        let k = ((n as f64 * frac) as usize).clamp(1, n - 1);
        let (g, _) = sample_pa_matrices(n, k, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5555);
        let v = BitVector::random(n, &mut rng);
        let w = BitVector::random(n, &mut rng);
        let sum = extract_key(&v.xor(&w).unwrap(), &g).unwrap();
        let parts = extract_key(&v, &g).unwrap().xor(&extract_key(&w, &g).unwrap()).unwrap();
        prop_assert_eq!(sum, parts);
    }

    #[test]
    fn serialization_round_trips(seed in any::<u64>(), n in 2usize..=40, k_raw in 1usize..40) {
        let k = k_raw.min(n - 1);
        let (g, h) = sample_pa_matrices(n, k, seed).unwrap();
        let text = serialize_pa(&g, &h).unwrap();
        prop_assert_eq!(parse_pa(&text).unwrap(), (g, h));
    }
}
