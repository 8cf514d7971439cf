mod common;

use common::{argument_principle, c64, close, safe_symbol};
use fredholm_core::algebra::{projection_class, KClass, Projection, ToeplitzElement};
use fredholm_core::fredholm::{
    certify, conjugate_projections, conjugate_projections_matrix, conjugation_constant, index, perturb_inverse,
    transport, EngineOptions, Strategy as IndexStrategy,
};
use fredholm_core::laurent::{BaseRing, LaurentPoly};
use fredholm_core::numkit::{self, ComplexMatrix, C64};
use proptest::prelude::*;

fn auto() -> IndexStrategy {
    IndexStrategy::Auto { modular_inverse: None }
}

fn opts() -> EngineOptions {
    EngineOptions::default()
}

fn unit_peak(f: LaurentPoly) -> LaurentPoly {
    let peak = f.grid_max(256);
    f.scale(C64::new(1.0 / peak, 0.0))
}

fn correction(n_max: usize) -> impl Strategy<Value = ComplexMatrix> {
    (0..=n_max).prop_flat_map(|n| {
        prop::collection::vec(c64(), n * n).prop_map(move |v| ComplexMatrix::from_row_major(n, n, v).unwrap())
    })
}

/// Scalar element with a symbol clear of the circle and unit peak.
fn fredholm_element() -> impl Strategy<Value = ToeplitzElement> {
    (safe_symbol(4), correction(5)).prop_map(|(f, k)| ToeplitzElement::new(unit_peak(f), k).unwrap())
}

fn winding_oracle(a: &ToeplitzElement) -> KClass {
    KClass(vec![-argument_principle(a.symbol(), 4096)])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn index_matches_argument_principle(a in fredholm_element()) {
        let res = index(&a, &auto(), &opts()).unwrap();
        prop_assert_eq!(&res.k_class, &winding_oracle(&a));
        prop_assert_eq!(res.oracle_class.as_ref(), Some(&res.k_class));
        prop_assert!(res.certificate.max_residual() < 1.0);
        prop_assert_eq!(res.certificate.class().unwrap(), res.k_class);
    }

    #[test]
    fn adjoint_negates_index(a in fredholm_element()) {
        let res = index(&a, &auto(), &opts()).unwrap();
        let adj = index(&a.adjoint(), &auto(), &opts()).unwrap();
        prop_assert_eq!(adj.k_class, -&res.k_class);
        // The adjoint certificate is itself valid for a*.
        let c = res.certificate.adjoint();
        let again = certify(&a.adjoint(), &c.p, &c.q, &c.b, 1e-9).unwrap();
        prop_assert!(again.max_residual() < 1.0);
    }

    #[test]
    fn perturbation_bound_holds(a in fredholm_element(), beta in 0.05f64..0.9, raw in correction(4)) {
        prop_assume!(!raw.is_zero());
        let cert = index(&a, &auto(), &opts()).unwrap().certificate;
        let f = ToeplitzElement::finite(BaseRing::scalar(), raw).unwrap();
        let c = f.scale(C64::new(beta / (cert.b_norm_upper * f.norm_upper()), 0.0));
        let b = cert.b_norm_upper;
        let bound = b / (1.0 - b * c.norm_upper());
        let out = perturb_inverse(&cert, &a, &c, 1e-9).unwrap();
        prop_assert!(out.b_norm_upper <= bound + 1e-8, "{} > {}", out.b_norm_upper, bound);
        prop_assert!(out.max_residual() < 1.0);
        prop_assert_eq!(out.class().unwrap(), cert.class().unwrap());
    }

    #[test]
    fn transport_is_an_equivalence(a in fredholm_element(), rank in 1usize..=3, seed in prop::collection::vec(c64(), 36)) {
        let cert = index(&a, &auto(), &opts()).unwrap().certificate;
        let len = cert.p.support() + 3;
        let window = cert.p.complement().window(len);
        let basis = ComplexMatrix::from_fn(len, rank, |i, j| seed[(i * rank + j) % seed.len()]);
        let r = Projection::onto_range(BaseRing::scalar(), &(&window * &basis)).unwrap();
        let tr = transport(&a, &cert, &r).unwrap();
        let ar = &a * &r.element();
        prop_assert_eq!(projection_class(&tr.s).unwrap(), projection_class(&r).unwrap());
        prop_assert!((&(&tr.s.element() * &ar) - &ar).norm_upper() <= 1e-11);
        let m = ar.support().max(tr.s.support());
        prop_assert_eq!(tr.rank, numkit::rank(&ar.truncate(m), 1e-10));
        let vtv = &tr.v.adjoint() * &tr.v;
        let vvt = &tr.v * &tr.v.adjoint();
        prop_assert!((&vtv - &r.element()).norm_upper() <= 1e-9);
        prop_assert!((&vvt - &tr.s.element()).norm_upper() <= 1e-9);
    }

    #[test]
    fn compact_perturbation_keeps_index(a in fredholm_element(), k in correction(6)) {
        let f = ToeplitzElement::finite(BaseRing::scalar(), k).unwrap();
        let ia = index(&a, &auto(), &opts()).unwrap().k_class;
        let iaf = index(&(&a + &f), &auto(), &opts()).unwrap().k_class;
        prop_assert_eq!(ia, iaf);
    }

    #[test]
    fn block_index_is_per_block(f in safe_symbol(3), g in safe_symbol(3), k in correction(3)) {
        let ring = BaseRing::new(vec![1, 1]).unwrap();
        let (f, g) = (unit_peak(f), unit_peak(g));
        let sym = LaurentPoly::block_diagonal(ring.clone(), &[f.clone(), g.clone()]).unwrap();
        let mut corr = k.resized(2 * k.rows(), 2 * k.rows());
        ring.mask_blocks(&mut corr);
        let a = ToeplitzElement::new(sym, corr).unwrap();
        let res = index(&a, &auto(), &opts()).unwrap();
        let expect = KClass(vec![-argument_principle(&f, 4096), -argument_principle(&g, 4096)]);
        prop_assert_eq!(&res.k_class, &expect);
        let c = &res.certificate;
        let whole = certify(&a, &c.p, &c.q, &c.b, 1e-9).unwrap();
        prop_assert!(whole.max_residual() < 1.0);
    }
}

/// Random pair of `n x n` equal-rank projections at distance below 1/2.
fn projection_pair() -> impl Strategy<Value = (ComplexMatrix, ComplexMatrix)> {
    (1usize..=12)
        .prop_flat_map(|n| (Just(n), 0..=n))
        .prop_flat_map(|(n, k)| {
            let k1 = k.max(1);
            (
                Just(n),
                Just(k),
                common::matrix(n, k1),
                common::matrix(n, k1),
                0.0f64..0.3,
            )
        })
        .prop_filter_map("distance at least 1/2", |(n, k, x, y, t)| {
            if k == 0 {
                let z = ComplexMatrix::zeros(n, n);
                return Some((z.clone(), z));
            }
            let p = numkit::range_projection(&x, 1e-12);
            let q = numkit::range_projection(&(&x + &y.scale_real(t)), 1e-12);
            (numkit::rank(&q, 1e-8) == k && numkit::spectral_norm(&(&p - &q)) < 0.5).then_some((p, q))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn conjugation_bound((p, q) in projection_pair()) {
        let (u, info) = conjugate_projections_matrix(&p, &q).unwrap();
        let n = p.rows();
        prop_assert!(close(&(&(&u.adjoint() * &p) * &u), &q, 1e-10));
        prop_assert!(close(&(&u.adjoint() * &u), &ComplexMatrix::identity(n), 1e-10));
        prop_assert!(info.deviation <= conjugation_constant() * info.distance + 1e-9);
        prop_assert!(info.within_bound(1e-9));
    }
}

#[test]
fn conjugation_constant_value() {
    assert!((conjugation_constant() - 3.656_854_249_492_38).abs() < 1e-15);
}

#[test]
fn element_conjugation_moves_unit() {
    let ring = BaseRing::scalar();
    let e0 = Projection::unit(ring.clone(), 1);
    let mut m = ComplexMatrix::zeros(2, 2);
    let (c, s) = (0.2f64.cos(), 0.2f64.sin());
    m[(0, 0)] = C64::new(c * c, 0.0);
    m[(0, 1)] = C64::new(c * s, 0.0);
    m[(1, 0)] = C64::new(c * s, 0.0);
    m[(1, 1)] = C64::new(s * s, 0.0);
    let tilted = Projection::finite(ring, m).unwrap();
    let (u, info) = conjugate_projections(&e0, &tilted).unwrap();
    let moved = &(&u.adjoint() * &e0.element()) * &u;
    assert!((&moved - &tilted.element()).norm_upper() < 1e-12);
    assert!((info.distance - 0.2f64.sin()).abs() < 1e-12);
    assert!(info.within_bound(0.0));
}

#[test]
fn classical_shifts() {
    for k in -5..=5 {
        let a = ToeplitzElement::shift(BaseRing::scalar(), k);
        assert_eq!(
            index(&a, &auto(), &opts()).unwrap().k_class,
            KClass(vec![-k]),
            "k = {k}"
        );
    }
}

#[test]
fn spot_values() {
    let ring = BaseRing::new(vec![1, 1]).unwrap();
    let sym = LaurentPoly::block_diagonal(
        ring,
        &[LaurentPoly::scalar_real(1, &[1.0]), LaurentPoly::scalar_real(0, &[1.0])],
    )
    .unwrap();
    let res = index(&ToeplitzElement::from_symbol(sym), &auto(), &opts()).unwrap();
    assert_eq!(res.k_class, KClass(vec![-1, 0]));

    let f = LaurentPoly::from_roots(0, C64::new(1.0, 0.0), &[C64::new(0.5, 0.0), C64::new(3.0, 0.0)]);
    let a = ToeplitzElement::from_symbol(f);
    for strategy in [auto(), IndexStrategy::Atkinson { modular_inverse: None }] {
        assert_eq!(index(&a, &strategy, &opts()).unwrap().k_class, KClass(vec![-1]));
    }
}
