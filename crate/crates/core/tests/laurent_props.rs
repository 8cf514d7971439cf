mod common;

use common::{argument_principle, c64, safe_symbol};
use fredholm_core::laurent::{BaseRing, LaurentPoly, DEFAULT_MARGIN};
use fredholm_core::numkit::{self, ComplexMatrix, C64};
use proptest::prelude::*;

fn coeff_max(f: &LaurentPoly) -> f64 {
    f.coeffs().iter().map(ComplexMatrix::max_abs).fold(0.0, f64::max)
}

fn general_symbol(ring: BaseRing) -> impl Strategy<Value = LaurentPoly> {
    let d = ring.dim();
    (-4i64..=2, 1usize..=5).prop_flat_map(move |(lo, len)| {
        let ring = ring.clone();
        prop::collection::vec(prop::collection::vec(c64(), d * d), len).prop_map(move |cs| {
            let mut coeffs: Vec<ComplexMatrix> = cs
                .into_iter()
                .map(|v| ComplexMatrix::from_row_major(d, d, v).unwrap())
                .collect();
            for c in &mut coeffs {
                ring.mask_blocks(c);
            }
            LaurentPoly::new(ring.clone(), lo, coeffs).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn winding_is_additive(f in safe_symbol(6), g in safe_symbol(6)) {
        let fg = f.mul(&g).unwrap();
        let wf = f.winding_number(DEFAULT_MARGIN).unwrap()[0];
        let wg = g.winding_number(DEFAULT_MARGIN).unwrap()[0];
        let wfg = fg.winding_number(DEFAULT_MARGIN).unwrap()[0];
        prop_assert_eq!(wfg, wf + wg);
        prop_assert_eq!(wfg, argument_principle(&fg, 4096));
    }

    #[test]
    fn winding_matches_argument_principle(f in safe_symbol(8)) {
        let w = f.winding_number(DEFAULT_MARGIN).unwrap()[0];
        prop_assert_eq!(w, argument_principle(&f, 4096));
    }

    #[test]
    fn adjoint_negates_winding(f in safe_symbol(6)) {
        let w = f.winding_number(DEFAULT_MARGIN).unwrap()[0];
        let wa = f.adjoint().winding_number(DEFAULT_MARGIN).unwrap()[0];
        prop_assert_eq!(wa, -w);
    }

    #[test]
    fn wiener_hopf_round_trip(f in safe_symbol(10)) {
        let wh = f.wiener_hopf_factorize(DEFAULT_MARGIN).unwrap();
        let diff = f.sub(&wh.product()).unwrap();
        prop_assert!(coeff_max(&diff) <= 1e-9 * (1.0 + coeff_max(&f)), "{:e}", coeff_max(&diff));
        prop_assert!(wh.inside.iter().all(|r| r.norm() < 1.0));
        prop_assert!(wh.outside.iter().all(|r| r.norm() > 1.0));
        prop_assert_eq!(wh.winding, f.winding_number(DEFAULT_MARGIN).unwrap()[0]);
    }

    #[test]
    fn sup_norm_is_subadditive(f in general_symbol(BaseRing::scalar()), g in general_symbol(BaseRing::scalar())) {
        let sum = f.add(&g).unwrap();
        prop_assert!(sum.sup_norm_upper() <= f.sup_norm_upper() + g.sup_norm_upper() + 1e-12);
    }

    #[test]
    fn sup_norm_is_subadditive_on_blocks(
        f in general_symbol(BaseRing::new(vec![1, 2]).unwrap()),
        g in general_symbol(BaseRing::new(vec![1, 2]).unwrap()),
    ) {
        let sum = f.add(&g).unwrap();
        prop_assert!(sum.sup_norm_upper() <= f.sup_norm_upper() + g.sup_norm_upper() + 1e-12);
    }

    /// The certified bound dominates the value at every sampled point.
    #[test]
    fn sup_norm_dominates_samples(f in general_symbol(BaseRing::new(vec![2, 1]).unwrap()), t in 0.0..std::f64::consts::TAU) {
        let z = C64::from_polar(1.0, t);
        prop_assert!(numkit::spectral_norm(&f.eval(z)) <= f.sup_norm_upper() + 1e-12);
    }

    #[test]
    fn product_evaluates_pointwise(
        f in general_symbol(BaseRing::single(2)),
        g in general_symbol(BaseRing::single(2)),
        t in 0.0..std::f64::consts::TAU,
    ) {
        let z = C64::from_polar(1.0, t);
        let lhs = f.mul(&g).unwrap().eval(z);
        let rhs = &f.eval(z) * &g.eval(z);
        prop_assert!((&lhs - &rhs).max_abs() <= 1e-12);
    }

    #[test]
    fn determinant_evaluates_pointwise(f in general_symbol(BaseRing::single(2)), t in 0.0..std::f64::consts::TAU) {
        let z = C64::from_polar(1.0, t);
        let m = f.eval(z);
        let direct = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        let det = f.determinant().unwrap().eval(z)[(0, 0)];
        prop_assert!((det - direct).norm() <= 1e-12);
    }
}

#[test]
fn winding_examples() {
    let z = LaurentPoly::monomial(BaseRing::scalar(), 1);
    assert_eq!(z.winding_number(DEFAULT_MARGIN).unwrap(), vec![1]);
    let f = LaurentPoly::from_roots(0, C64::new(1.0, 0.0), &[C64::new(0.5, 0.0), C64::new(3.0, 0.0)]);
    assert_eq!(f.winding_number(DEFAULT_MARGIN).unwrap(), vec![1]);
    let g = LaurentPoly::scalar_real(-2, &[1.0]);
    assert_eq!(g.winding_number(DEFAULT_MARGIN).unwrap(), vec![-2]);
    let on_circle = LaurentPoly::scalar_real(0, &[-1.0, 1.0]);
    assert!(on_circle.winding_number(DEFAULT_MARGIN).is_err());
}
