//! Randomized invariants of the polynomial ring, Gram expansion, sampling and
//! polytope membership.

use polyfilt::geometry::{
    mc_volume_on, sample_uniform_box, BoundingBox, HalfSpace, Polytope, SemialgebraicSet,
};
use polyfilt::polynomial::{gram_expand, monomial_basis, Monomial, Polynomial};
use proptest::prelude::*;

/// Small integer coefficients keep every product exactly representable, so
/// ring identities can be checked coefficient for coefficient.
fn integer_poly(n: usize, max_deg: u32) -> impl Strategy<Value = Polynomial> {
    let term = (prop::collection::vec(0..=max_deg, n), -5i32..=5);
    prop::collection::vec(term, 0..8).prop_map(move |terms| {
        let terms = terms
            .into_iter()
            .filter(|(e, _)| e.iter().sum::<u32>() <= max_deg)
            .map(|(e, c)| (Monomial::new(e), c as f64));
        Polynomial::from_terms(n, terms).unwrap()
    })
}

fn triple(max_deg: u32) -> impl Strategy<Value = (Polynomial, Polynomial, Polynomial)> {
    (1usize..=4).prop_flat_map(move |n| {
        (
            integer_poly(n, max_deg),
            integer_poly(n, max_deg),
            integer_poly(n, max_deg),
        )
    })
}

fn real_poly_and_point() -> impl Strategy<Value = (Polynomial, Polynomial, Vec<f64>)> {
    (1usize..=4).prop_flat_map(|n| {
        let term = (prop::collection::vec(0u32..=4, n), -3.0f64..3.0);
        let poly = prop::collection::vec(term, 1..8).prop_map(move |terms| {
            let terms = terms
                .into_iter()
                .filter(|(e, _)| e.iter().sum::<u32>() <= 4)
                .map(|(e, c)| (Monomial::new(e), c));
            Polynomial::from_terms(n, terms).unwrap()
        });
        (poly.clone(), poly, prop::collection::vec(-1.5f64..1.5, n))
    })
}

fn same(a: &Polynomial, b: &Polynomial) -> bool {
    a.try_sub(b).unwrap().is_zero()
}

/// Number of exponent vectors in `n` variables with total degree <= `d`,
/// counted by enumeration.
fn count_exponents(n: usize, d: u32) -> usize {
    if n == 0 {
        return 1;
    }
    (0..=d).map(|e| count_exponents(n - 1, d - e)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn addition_is_commutative_and_associative((p, q, r) in triple(4)) {
        prop_assert!(same(&(&p + &q), &(&q + &p)));
        prop_assert!(same(&(&(&p + &q) + &r), &(&p + &(&q + &r))));
    }

    #[test]
    fn multiplication_is_commutative_and_associative((p, q, r) in triple(4)) {
        prop_assert!(same(&(&p * &q), &(&q * &p)));
        prop_assert!(same(&(&(&p * &q) * &r), &(&p * &(&q * &r))));
    }

    #[test]
    fn multiplication_distributes((p, q, r) in triple(4)) {
        prop_assert!(same(&(&p * &(&q + &r)), &(&(&p * &q) + &(&p * &r))));
    }

    #[test]
    fn subtraction_inverts_addition((p, q, _r) in triple(4)) {
        prop_assert!(same(&(&(&p + &q) - &q), &p));
        prop_assert!((&p - &p).is_zero());
    }

    #[test]
    fn evaluation_is_a_ring_homomorphism((p, q, x) in real_poly_and_point()) {
        let (pv, qv) = (p.evaluate(&x).unwrap(), q.evaluate(&x).unwrap());
        let prod = (&p * &q).evaluate(&x).unwrap();
        let sum = (&p + &q).evaluate(&x).unwrap();
        let scale = 1.0 + pv.abs() * qv.abs();
        prop_assert!((prod - pv * qv).abs() <= 1e-12 * scale, "{} vs {}", prod, pv * qv);
        prop_assert!((sum - (pv + qv)).abs() <= 1e-12 * (1.0 + pv.abs() + qv.abs()));
    }

    #[test]
    fn rank_one_gram_is_a_square(n in 1usize..=3, d in 0u32..=2, seed in prop::collection::vec(-2.0f64..2.0, 10)) {
        let basis = monomial_basis(n, d);
        let a: Vec<f64> = (0..basis.len()).map(|i| seed[i % seed.len()] + i as f64 * 0.1).collect();
        let q: Vec<Vec<f64>> = a.iter().map(|ai| a.iter().map(|aj| ai * aj).collect()).collect();
        let (expanded, _) = gram_expand(&basis, &q).unwrap();
        let linear = Polynomial::from_terms(n, basis.monomials().iter().cloned().zip(a.iter().copied())).unwrap();
        let square = &linear * &linear;
        let diff = expanded.try_sub(&square).unwrap().max_abs_coefficient();
        prop_assert!(diff <= 1e-12 * (1.0 + square.max_abs_coefficient()), "diff {}", diff);
    }

    #[test]
    fn uniform_samples_stay_in_the_box(
        lo in prop::collection::vec(-10.0f64..10.0, 1..5),
        widths in prop::collection::vec(0.0f64..5.0, 5),
        seed in any::<u64>(),
    ) {
        let hi: Vec<f64> = lo.iter().zip(&widths).map(|(l, w)| l + w).collect();
        let bx = BoundingBox::new(lo.clone(), hi).unwrap();
        for p in sample_uniform_box(&bx, 200, seed) {
            prop_assert!(bx.contains(&p, 0.0).unwrap(), "{:?} outside {:?}", p, bx);
        }
    }

    #[test]
    fn mc_volume_respects_inclusion(r_small in 0.1f64..0.9, extra in 0.0f64..0.5, seed in any::<u64>()) {
        let bx = BoundingBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let pts = sample_uniform_box(&bx, 2000, seed);
        let r_big = r_small + extra;
        let small = mc_volume_on(|p| p[0] * p[0] + p[1] * p[1] <= r_small * r_small, &bx, &pts);
        let big = mc_volume_on(|p| p[0] * p[0] + p[1] * p[1] <= r_big * r_big, &bx, &pts);
        prop_assert!(small <= big);
        prop_assert!(big <= bx.volume());
    }

    #[test]
    fn polytope_membership_matches_affine_constraints(
        rows in prop::collection::vec((prop::collection::vec(-1.0f64..1.0, 3), -1.0f64..1.0), 1..6),
        point in prop::collection::vec(-2.0f64..2.0, 3),
    ) {
        let rows: Vec<_> = rows.into_iter().filter(|(w, _)| w.iter().any(|c| c.abs() > 1e-3)).collect();
        prop_assume!(!rows.is_empty());
        let hs: Vec<HalfSpace> = rows.iter().map(|(w, nu)| HalfSpace::new(w.clone(), *nu).unwrap()).collect();
        let poly = Polytope::new(hs).unwrap();
        let set = SemialgebraicSet::new(3, rows.iter().map(|(w, nu)| Polynomial::affine(w, -nu)).collect()).unwrap();
        for tol in [0.0, 1e-9, 0.1] {
            prop_assert_eq!(poly.contains(&point, tol).unwrap(), set.contains(&point, tol).unwrap());
        }
    }
}

#[test]
fn basis_size_matches_enumeration() {
    for n in 0..=6 {
        for d in 0..=6 {
            assert_eq!(
                monomial_basis(n, d).len(),
                count_exponents(n, d),
                "n={n} d={d}"
            );
        }
    }
}
