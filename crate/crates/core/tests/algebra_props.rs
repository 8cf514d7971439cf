mod common;

use common::{c64, close};
use fredholm_core::algebra::{
    elem_mul, mvn_witness, projection_class, FiniteTypeIdeal, KClass, Projection, ToeplitzElement,
};
use fredholm_core::laurent::{BaseRing, LaurentPoly};
use fredholm_core::numkit::{self, ComplexMatrix, C64};
use proptest::prelude::*;

fn ring() -> impl Strategy<Value = BaseRing> {
    prop_oneof![
        Just(BaseRing::scalar()),
        Just(BaseRing::new(vec![1, 1]).unwrap()),
        Just(BaseRing::new(vec![2, 1]).unwrap()),
    ]
}

fn masked(ring: &BaseRing, rows: usize, cols: usize, v: Vec<C64>) -> ComplexMatrix {
    let mut m = ComplexMatrix::from_row_major(rows, cols, v).unwrap();
    ring.mask_blocks(&mut m);
    m
}

fn symbol(ring: BaseRing) -> impl Strategy<Value = LaurentPoly> {
    let d = ring.dim();
    (-3i64..=2, 1usize..=4, prop::collection::vec(c64(), 4 * d * d)).prop_map(move |(lo, len, v)| {
        let coeffs = (0..len)
            .map(|k| masked(&ring, d, d, v[k * d * d..(k + 1) * d * d].to_vec()))
            .collect();
        LaurentPoly::new(ring.clone(), lo, coeffs).unwrap()
    })
}

fn correction(ring: BaseRing, max_n: usize) -> impl Strategy<Value = ComplexMatrix> {
    let d = ring.dim();
    (0..=max_n).prop_flat_map(move |n| {
        let ring = ring.clone();
        prop::collection::vec(c64(), n * d * n * d).prop_map(move |v| masked(&ring, n * d, n * d, v))
    })
}

fn element_in(ring: BaseRing) -> impl Strategy<Value = ToeplitzElement> {
    (symbol(ring.clone()), correction(ring, 5)).prop_map(|(s, k)| ToeplitzElement::new(s, k).unwrap())
}

fn finite_in(ring: BaseRing) -> impl Strategy<Value = ToeplitzElement> {
    correction(ring.clone(), 6).prop_map(move |k| ToeplitzElement::finite(ring.clone(), k).unwrap())
}

fn pair() -> impl Strategy<Value = (ToeplitzElement, ToeplitzElement)> {
    ring().prop_flat_map(|r| (element_in(r.clone()), element_in(r)))
}

fn element_and_finite() -> impl Strategy<Value = (ToeplitzElement, ToeplitzElement)> {
    ring().prop_flat_map(|r| (element_in(r.clone()), finite_in(r)))
}

/// Finite projection onto `rank` random vectors, each inside one ring block.
fn finite_projection() -> impl Strategy<Value = Projection> {
    (ring(), 1usize..=5).prop_flat_map(|(r, len)| {
        let d = r.dim();
        (
            0usize..=3,
            prop::collection::vec((0usize..3, prop::collection::vec(c64(), len * d)), 3),
        )
            .prop_map(move |(rank, cols)| {
                let basis = ComplexMatrix::from_fn(len * d, rank, |i, j| {
                    let (b, ref v) = cols[j];
                    if r.block_of(i % d) == b % r.num_blocks() {
                        v[i]
                    } else {
                        C64::new(0.0, 0.0)
                    }
                });
                Projection::onto_range(r.clone(), &basis).unwrap()
            })
    })
}

fn bandwidth(a: &ToeplitzElement) -> usize {
    a.symbol().positive_reach() + a.symbol().negative_reach() + a.support()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn truncation_is_faithful((a, b) in pair(), m in 1usize..=10) {
        let m2 = m + bandwidth(&a) + bandwidth(&b);
        let d = a.ring().dim();
        let prod = elem_mul(&a, &b).unwrap().truncate(m);
        let big = &a.truncate(m2) * &b.truncate(m2);
        let corner = big.submatrix(0, 0, m * d, m * d);
        prop_assert!(close(&prod, &corner, 1e-12), "{:e}", (&prod - &corner).max_abs());
    }

    #[test]
    fn product_is_associative((a, b) in pair(), c in any::<u8>()) {
        let c = a.scale(C64::new(c as f64 / 255.0, 0.5)).adjoint();
        let left = &(&a * &b) * &c;
        let right = &a * &(&b * &c);
        let m = 6 + bandwidth(&left).max(bandwidth(&right));
        prop_assert!(close(&left.truncate(m), &right.truncate(m), 1e-11));
    }

    #[test]
    fn adjoint_reverses_products((a, b) in pair()) {
        let lhs = (&a * &b).adjoint();
        let rhs = &b.adjoint() * &a.adjoint();
        let m = 4 + bandwidth(&lhs).max(bandwidth(&rhs));
        prop_assert!(close(&lhs.truncate(m), &rhs.truncate(m), 1e-12));
        prop_assert!(close(&a.adjoint().truncate(m), &a.truncate(m).adjoint(), 0.0));
    }

    #[test]
    fn finite_elements_form_an_ideal((a, f) in element_and_finite()) {
        let ideal = FiniteTypeIdeal::new(a.ring().clone());
        prop_assert!(ideal.contains(&f));
        prop_assert!(elem_mul(&a, &f).unwrap().symbol().is_zero());
        prop_assert!(elem_mul(&f, &a).unwrap().symbol().is_zero());
        prop_assert!(ideal.contains(&(&f * &a)));
        prop_assert!(!ideal.contains(&a) || a.symbol().is_zero());
    }

    #[test]
    fn coordinate_projections_are_an_approximate_unit((_a, f) in element_and_finite(), extra in 0usize..4) {
        let ideal = FiniteTypeIdeal::new(f.ring().clone());
        let n = ideal.support_bound(&f).unwrap() + extra;
        let rest = ideal.unit(n).complement().element();
        prop_assert_eq!((&f * &rest).norm_upper(), 0.0);
        prop_assert_eq!((&rest * &f).norm_upper(), 0.0);
        if n > 0 && !f.correction().is_zero() && extra == 0 {
            // One coordinate short is not enough once the support is tight.
            let short = ideal.unit(n - 1).complement().element();
            prop_assert!((&f * &short).norm_upper() + (&short * &f).norm_upper() > 0.0);
        }
    }

    #[test]
    fn norm_upper_dominates_truncations(a in ring().prop_flat_map(element_in), m in 1usize..=24) {
        prop_assert!(numkit::spectral_norm(&a.truncate(m)) <= a.norm_upper() + 1e-12);
        prop_assert!(a.norm_lower(m) <= a.norm_upper() + 1e-12);
    }

    #[test]
    fn witness_preserves_class(p in finite_projection(), q in finite_projection()) {
        prop_assume!(p.ring() == q.ring());
        let v = mvn_witness(&p, &q).unwrap();
        let final_proj = Projection::from_element(&(&v * &v.adjoint())).unwrap();
        let initial = Projection::from_element(&(&v.adjoint() * &v)).unwrap();
        let kq = projection_class(&q).unwrap();
        prop_assert_eq!(projection_class(&final_proj).unwrap(), kq.clone());
        prop_assert_eq!(projection_class(&initial).unwrap(), kq);
        prop_assert!(final_proj.distance(&q) <= 1e-12);
        // The initial space sits past the support of p.
        prop_assert!(initial.overlap(&p) <= 1e-12);
    }

    #[test]
    fn class_is_additive_on_orthogonal_sums(p in finite_projection()) {
        // A copy of p moved past its own support.
        let v = mvn_witness(&p, &p).unwrap();
        let moved = Projection::from_element(&(&v.adjoint() * &v)).unwrap();
        let sum = p.orthogonal_sum(&moved).unwrap();
        let kp = projection_class(&p).unwrap();
        let total = &kp + &projection_class(&moved).unwrap();
        prop_assert_eq!(projection_class(&sum).unwrap(), total);
        prop_assert_eq!(projection_class(&p.complement()).is_err(), true);
        prop_assert_eq!(&kp - &kp, KClass::zero(p.ring().num_blocks()));
    }

    #[test]
    fn block_parts_reassemble(a in ring().prop_flat_map(element_in)) {
        let ring = a.ring().clone();
        let parts: Vec<ToeplitzElement> = (0..ring.num_blocks()).map(|i| a.block_part(i)).collect();
        let whole = ToeplitzElement::direct_sum(&ring, &parts).unwrap();
        let m = 3 + bandwidth(&a);
        prop_assert!(close(&whole.truncate(m), &a.truncate(m), 0.0));
    }
}
