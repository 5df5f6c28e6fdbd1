//! Property-based tests for the structural invariants: componentwise order,
//! index-box cardinality, mask bijectivity, polynomial algebra, difference
//! commutation and the refinement identity under random inputs.

use proptest::prelude::*;

use mixext::analysis::{mixed_difference, Domain};
use mixext::index::{indicator_vector, BinaryMask, IndexBox, MultiIndex};
use mixext::oracle::FnOracle;
use mixext::polyproj::{CoeffTensor, MonomialPoly};
use mixext::splines::{spline, RefinementMask};

fn small_index(d: usize) -> impl Strategy<Value = MultiIndex> {
    prop::collection::vec(-5i64..=5, d..=d).prop_map(|v| MultiIndex::of(&v))
}

proptest! {
    #[test]
    fn componentwise_order_is_antisymmetric(
        d in 1usize..=4,
        seed in any::<u64>(),
    ) {
        let mut rng = seed;
        let mut next = || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((rng >> 33) % 11) as i64 - 5
        };
        let a = MultiIndex::of(&(0..d).map(|_| next()).collect::<Vec<_>>());
        let b = MultiIndex::of(&(0..d).map(|_| next()).collect::<Vec<_>>());
        if a.le(&b) && b.le(&a) {
            prop_assert_eq!(&a, &b);
        }
        prop_assert!(a.le(&a));
        prop_assert!(!a.lt(&a));
    }

    #[test]
    fn index_box_count_matches_iteration(
        lo in small_index(3),
        hi in small_index(3),
    ) {
        let b = IndexBox::new(lo.clone(), hi.clone()).unwrap();
        let expected = if b.is_empty() {
            0
        } else {
            (0..3).map(|j| (hi[j] - lo[j] + 1) as usize).product()
        };
        prop_assert_eq!(b.count(), expected);
        prop_assert_eq!(b.iter().count(), expected);
        let mut seen = std::collections::BTreeSet::new();
        for v in b.iter() {
            prop_assert!(b.contains(&v));
            seen.insert(v.entries().to_vec());
        }
        prop_assert_eq!(seen.len(), expected);
    }

    #[test]
    fn indicator_round_trips_masks(code in 0usize..64, d in 1usize..=6) {
        let code = code & ((1 << d) - 1);
        let bits: Vec<bool> = (0..d).map(|j| code >> j & 1 == 1).collect();
        let mask = BinaryMask::new(bits);
        let chi = indicator_vector(&mask.support(), d).unwrap();
        prop_assert_eq!(&chi, &mask.to_multi_index());
        prop_assert_eq!(chi.support(), mask.support());
    }

    #[test]
    fn monomial_algebra_is_pointwise(
        ca in prop::collection::vec(-2.0f64..2.0, 6),
        cb in prop::collection::vec(-2.0f64..2.0, 6),
        x in prop::collection::vec(-1.2f64..1.2, 2),
    ) {
        let deg = MultiIndex::of(&[1, 2]);
        let make = |c: &[f64]| {
            let mut t = CoeffTensor::zeros(vec![2, 3]);
            t.data_mut().copy_from_slice(c);
            MonomialPoly::from_coeffs(deg.clone(), t)
        };
        let p = make(&ca);
        let q = make(&cb);
        let sum = p.add(&q);
        let prod = p.mul(&q);
        let pv = p.eval(&x);
        let qv = q.eval(&x);
        prop_assert!((sum.eval(&x) - (pv + qv)).abs() < 1e-12);
        prop_assert!((prod.eval(&x) - pv * qv).abs() < 1e-10);
        // Affine substitution is pointwise composition.
        let r = p.compose_affine(&[0.3, -0.1], &[0.5, 2.0]);
        let y = [0.3 + 0.5 * x[0], -0.1 + 2.0 * x[1]];
        prop_assert!((r.eval(&x) - p.eval(&y)).abs() < 1e-12);
    }

    #[test]
    fn refinement_identity_at_random_points(
        m in 0usize..=4,
        x in -0.4f64..5.4,
    ) {
        if m == 0 && (2.0 * x == (2.0 * x).floor()) {
            return Ok(()); // knots of the discontinuous order
        }
        let s = spline(m);
        let mask = RefinementMask::new(m);
        let rhs: f64 = (0..=m as i64 + 1)
            .map(|mu| mask.coeff(mu) * s.value(2.0 * x - mu as f64))
            .sum();
        prop_assert!((s.value(x) - rhs).abs() <= 1e-12);
    }

    #[test]
    fn mixed_difference_commutes_and_is_linear(
        h0 in -0.08f64..0.08,
        h1 in -0.08f64..0.08,
        x0 in 0.3f64..0.6,
        x1 in 0.3f64..0.6,
        a in -2.0f64..2.0,
    ) {
        let f = FnOracle::new(2, |x: &[f64]| (2.0 * x[0] + 0.5 * x[1] * x[1]).sin());
        let g = FnOracle::new(2, |x: &[f64]| x[0] * x[0] * x[1]);
        let combo = FnOracle::new(2, move |x: &[f64]| {
            (2.0 * x[0] + 0.5 * x[1] * x[1]).sin() + a * x[0] * x[0] * x[1]
        });
        let dom = Domain::cube(2);
        let l = MultiIndex::of(&[1, 2]);
        let h = [h0, h1];
        let x = [x0, x1];
        if let Some(direct) = mixed_difference(&combo, &l, &h, &x, &dom) {
            let fa = mixed_difference(&f, &l, &h, &x, &dom).unwrap();
            let ga = mixed_difference(&g, &l, &h, &x, &dom).unwrap();
            prop_assert!((direct - (fa + a * ga)).abs() < 1e-11);
            // Axis-nested evaluation agrees with the tensor-binomial form.
            let inner = FnOracle::new(2, move |y: &[f64]| {
                let fy = |x: &[f64]| (2.0 * x[0] + 0.5 * x[1] * x[1]).sin() + a * x[0] * x[0] * x[1];
                fy(&[y[0], y[1] + 2.0 * h1]) - 2.0 * fy(&[y[0], y[1] + h1]) + fy(&[y[0], y[1]])
            });
            let nested =
                mixed_difference(&inner, &MultiIndex::of(&[1, 0]), &h, &x, &dom).unwrap();
            prop_assert!((direct - nested).abs() < 1e-11);
        }
    }
}
