#![allow(dead_code)]

use std::f64::consts::PI;

use fredholm_core::laurent::LaurentPoly;
use fredholm_core::numkit::{self, ComplexMatrix, C64};
use proptest::prelude::*;

pub fn c64() -> impl Strategy<Value = C64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| C64::new(re, im))
}

pub fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec(c64(), rows * cols).prop_map(move |v| ComplexMatrix::from_row_major(rows, cols, v).unwrap())
}

pub fn any_matrix(max: usize) -> impl Strategy<Value = ComplexMatrix> {
    (1..=max, 1..=max).prop_flat_map(|(r, c)| matrix(r, c))
}

/// Product of two random factors through an inner dimension, so low rank
/// shows up often.
pub fn low_rank_matrix(max: usize) -> impl Strategy<Value = ComplexMatrix> {
    (1..=max, 1..=max, 0..=max).prop_flat_map(|(r, c, k)| {
        (matrix(r, k.max(1)), matrix(k.max(1), c)).prop_map(
            move |(a, b)| {
                if k == 0 {
                    ComplexMatrix::zeros(r, c)
                } else {
                    &a * &b
                }
            },
        )
    })
}

/// Root with modulus in `[0, 0.85]` or `[1.15, 3]`.
pub fn root() -> impl Strategy<Value = C64> {
    (prop_oneof![0.0f64..=0.85, 1.15f64..=3.0], 0.0..2.0 * PI).prop_map(|(r, t)| C64::from_polar(r, t))
}

/// `c z^lo prod (z - r_i)`, clear of the unit circle.
pub fn safe_symbol(max_roots: usize) -> impl Strategy<Value = LaurentPoly> {
    (
        -3i64..=3,
        prop::collection::vec(root(), 0..=max_roots),
        0.2f64..2.0,
        0.0..2.0 * PI,
    )
        .prop_map(|(lo, roots, r, t)| LaurentPoly::from_roots(lo, C64::from_polar(r, t), &roots))
}

/// Winding of a scalar symbol by accumulating phase increments on a fine
/// grid of the circle.
pub fn argument_principle(f: &LaurentPoly, samples: usize) -> i64 {
    let value = |j: usize| {
        let z = C64::from_polar(1.0, 2.0 * PI * j as f64 / samples as f64);
        f.eval(z)[(0, 0)]
    };
    let mut total = 0.0;
    let mut prev = value(0);
    for j in 1..=samples {
        let next = value(j % samples);
        total += (next / prev).arg();
        prev = next;
    }
    (total / (2.0 * PI)).round() as i64
}

/// Orthonormal basis of the range of a projection, from its eigenvectors.
pub fn range_basis(p: &ComplexMatrix) -> ComplexMatrix {
    let eig = numkit::hermitian_eigen(p).unwrap();
    let keep: Vec<usize> = (0..eig.values.len()).filter(|&k| eig.values[k] > 0.5).collect();
    let rows: Vec<usize> = (0..p.rows()).collect();
    eig.vectors.select(&rows, &keep)
}

pub fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
    a.rows() == b.rows() && a.cols() == b.cols() && (a - b).max_abs() <= tol
}
