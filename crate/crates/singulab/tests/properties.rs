use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use singulab::hessian::{congruence_witness, mixed_hessian, numeric_rank, real_hessian, Part, DEFAULT_RANK_TOL};
use singulab::link::gauss_linking;
use singulab::mixedpoly::generate::{random_poly, random_weighted_homogeneous};
use singulab::mixedpoly::verify_euler_identities;
use singulab::parse::parse_poly;

fn poly(seed: u64, n: usize, terms: usize, max_exp: u32) -> singulab::MixedPolynomial {
    random_poly(&mut ChaCha8Rng::seed_from_u64(seed), n, terms, max_exp)
}

fn circle(center: [f64; 3], u: [f64; 3], v: [f64; 3], samples: usize) -> Vec<[f64; 3]> {
    (0..samples)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / samples as f64;
            std::array::from_fn(|i| center[i] + a.cos() * u[i] + a.sin() * v[i])
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conjugation_is_an_involution(seed in any::<u64>(), n in 1usize..=3) {
        let p = poly(seed, n, 5, 3);
        prop_assert_eq!(p.conj().conj(), p);
    }

    #[test]
    fn wirtinger_derivatives_obey_leibniz(seed in any::<u64>(), j in 0usize..2) {
        let p = poly(seed, 2, 4, 3);
        let q = poly(seed ^ 0x9e37, 2, 4, 3);
        let pq = p.mul(&q);
        prop_assert_eq!(pq.dz(j), p.dz(j).mul(&q).add(&p.mul(&q.dz(j))));
        prop_assert_eq!(pq.dzbar(j), p.dzbar(j).mul(&q).add(&p.mul(&q.dzbar(j))));
        prop_assert_eq!(p.conj().dzbar(j), p.dz(j).conj());
    }

    #[test]
    fn canonical_text_parses_back(seed in any::<u64>(), n in 1usize..=3) {
        let p = poly(seed, n, 6, 4);
        prop_assert_eq!(parse_poly(&p.to_string(), Some(n)).unwrap(), p);
    }

    #[test]
    fn generated_homogeneous_polynomials_satisfy_euler(seed in any::<u64>(), n in 1usize..=3) {
        let (p, w) = random_weighted_homogeneous(&mut ChaCha8Rng::seed_from_u64(seed), n, 3);
        prop_assert!(verify_euler_identities(&p, &w).unwrap().holds());
    }

    #[test]
    fn real_hessians_are_congruent_to_the_mixed_hessian(seed in any::<u64>()) {
        let p = poly(seed, 2, 5, 3);
        prop_assert!(congruence_witness(&p).is_exact());
        prop_assert!(mixed_hessian(&p).is_symmetric());
    }

    #[test]
    fn mixed_and_real_hessian_ranks_agree(seed in any::<u64>(), re in prop::array::uniform4(-1.0f64..1.0)) {
        // products of linear factors give rank drops often enough to matter
        let a = poly(seed, 2, 2, 1);
        let b = poly(seed ^ 1, 2, 2, 1);
        let p = a.mul(&b).add(&poly(seed ^ 2, 2, 1, 2));
        let w = [Complex64::new(re[0], re[1]), Complex64::new(re[2], re[3])];
        let h = mixed_hessian(&p).evaluate(&w);
        let hr = real_hessian(&p, Part::Re).evaluate(&w);
        let hi = real_hessian(&p, Part::Im).evaluate(&w);
        let combined = DMatrix::from_fn(4, 4, |r, c| Complex64::new(hr[(r, c)], hi[(r, c)]));
        prop_assert_eq!(numeric_rank(&h, DEFAULT_RANK_TOL).unwrap(), numeric_rank(&combined, DEFAULT_RANK_TOL).unwrap());
    }

    #[test]
    fn linking_integral_is_symmetric_and_integral(d in prop_oneof![0.2f64..1.8, 2.2f64..3.0], samples in 64usize..160) {
        let a = circle([0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], samples);
        let b = circle([d, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0], samples + 7);
        let ab = gauss_linking(&a, &b);
        let ba = gauss_linking(&b, &a);
        prop_assert!((ab - ba).abs() < 1e-9);
        let expected = if d < 2.0 { 1.0 } else { 0.0 };
        prop_assert!((ab.abs() - expected).abs() < 1e-6, "d = {d}: {ab}");
    }
}
