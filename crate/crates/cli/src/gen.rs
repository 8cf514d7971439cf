//! Seeded random instances for the campaigns.
//!
//! Roots are drawn from `[0, 0.85]` or `[1.15, 3]` in modulus, so every
//! generated symbol stays clear of the unit circle by at least 0.15.

use std::f64::consts::PI;

use fredholm_core::algebra::{Projection, ToeplitzElement};
use fredholm_core::laurent::{BaseRing, LaurentPoly};
use fredholm_core::numkit::{self, ComplexMatrix, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const INNER_MAX: f64 = 0.85;
pub const OUTER_MIN: f64 = 1.15;
pub const OUTER_MAX: f64 = 3.0;
pub const MAX_ROOTS: usize = 6;
pub const MAX_CORRECTION: usize = 8;

/// Independent stream per trial so records do not depend on trial order.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64 + 1);
    rng
}

pub fn unit_disc(rng: &mut impl Rng) -> C64 {
    let r = rng.gen::<f64>().sqrt();
    C64::from_polar(r, rng.gen_range(0.0..2.0 * PI))
}

pub fn phase(rng: &mut impl Rng) -> C64 {
    C64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI))
}

/// Standard complex normal: independent real and imaginary parts of
/// variance 1/2.
pub fn gaussian(rng: &mut impl Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn root(rng: &mut impl Rng) -> C64 {
    let modulus = if rng.gen_bool(0.5) {
        rng.gen_range(0.0..=INNER_MAX)
    } else {
        rng.gen_range(OUTER_MIN..=OUTER_MAX)
    };
    C64::from_polar(modulus, rng.gen_range(0.0..2.0 * PI))
}

/// `c z^lo prod (z - r_i)` with at most `max_roots` roots, scaled to unit
/// sup norm on the circle.
pub fn scalar_symbol(rng: &mut impl Rng, max_roots: usize, lo_range: i64) -> LaurentPoly {
    let m = rng.gen_range(0..=max_roots);
    let roots: Vec<C64> = (0..m).map(|_| root(rng)).collect();
    let lo = rng.gen_range(-lo_range..=lo_range);
    let raw = LaurentPoly::from_roots(lo, phase(rng), &roots);
    let peak = raw.grid_max(256);
    raw.scale(C64::new(1.0 / peak, 0.0))
}

/// Dense `(N d) x (N d)` correction with entries in the unit disc, zero
/// across different ring blocks.
pub fn correction(rng: &mut impl Rng, ring: &BaseRing, max_n: usize) -> ComplexMatrix {
    let n = rng.gen_range(0..=max_n);
    let d = ring.dim();
    let owner: Vec<usize> = (0..d).map(|x| ring.block_of(x)).collect();
    ComplexMatrix::from_fn(n * d, n * d, |i, j| {
        let v = unit_disc(rng);
        if owner[i % d] == owner[j % d] {
            v
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

pub fn scalar_element(rng: &mut impl Rng) -> ToeplitzElement {
    let ring = BaseRing::scalar();
    let symbol = scalar_symbol(rng, MAX_ROOTS, 3);
    let k = correction(rng, &ring, MAX_CORRECTION);
    ToeplitzElement::new(symbol, k).expect("generated element is well formed")
}

/// Symbol-zero element with entries bounded by one.
pub fn finite_element(rng: &mut impl Rng, ring: &BaseRing) -> ToeplitzElement {
    let k = correction(rng, ring, MAX_CORRECTION);
    ToeplitzElement::finite(ring.clone(), k).expect("generated correction is well formed")
}

fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Well conditioned constant matrix `I + 0.3 G / sqrt(m)`.
fn near_identity(rng: &mut impl Rng, m: usize) -> ComplexMatrix {
    let g = random_matrix(rng, m, m).scale_real(0.3 / (m as f64).sqrt());
    &ComplexMatrix::identity(m) + &g
}

/// One `m x m` block: `A diag(s_1, .., s_m) E B` with scalar `s_i` from
/// [`scalar_symbol`], constant `A`, `B` and a unimodular elementary factor
/// `E = 1 + c z^e E_ij`, so the determinant winding is the sum of the
/// scalar windings.
pub fn matrix_block(rng: &mut impl Rng, m: usize) -> LaurentPoly {
    let ring = BaseRing::single(m);
    if m == 1 {
        return scalar_symbol(rng, 3, 1);
    }
    let roots_each = (12 / m).min(3);
    let diag: Vec<LaurentPoly> = (0..m).map(|_| scalar_symbol(rng, roots_each, 1)).collect();
    let block_ring = BaseRing::new(vec![1; m]).expect("valid ring");
    let d = LaurentPoly::block_diagonal(block_ring, &diag).expect("scalar blocks");
    let d = LaurentPoly::new(ring.clone(), d.lo(), d.coeffs().to_vec()).expect("same dimension");
    let a = LaurentPoly::constant(ring.clone(), near_identity(rng, m)).expect("constant");
    let b = LaurentPoly::constant(ring.clone(), near_identity(rng, m)).expect("constant");
    let i = rng.gen_range(0..m);
    let j = (i + rng.gen_range(1..m)) % m;
    let e_pow = rng.gen_range(-1..=1);
    let mut ec = ComplexMatrix::zeros(m, m);
    ec[(i, j)] = unit_disc(rng).scale(0.5);
    let elem = LaurentPoly::identity(ring.clone())
        .add(&LaurentPoly::new(ring.clone(), e_pow, vec![ec]).expect("monomial"))
        .expect("same ring");
    let f = a
        .mul(&d)
        .and_then(|x| x.mul(&elem))
        .and_then(|x| x.mul(&b))
        .expect("same ring");
    let peak = f.grid_max(256);
    f.scale(C64::new(1.0 / peak, 0.0)).chopped(1e-15)
}

pub fn block_ring(rng: &mut impl Rng, blocks: usize) -> BaseRing {
    let sizes: Vec<usize> = (0..blocks).map(|_| if rng.gen_bool(0.6) { 1 } else { 2 }).collect();
    BaseRing::new(sizes).expect("block sizes are within the cap")
}

pub fn block_element(rng: &mut impl Rng, ring: &BaseRing, max_n: usize) -> ToeplitzElement {
    let blocks: Vec<LaurentPoly> = ring.block_sizes().iter().map(|&m| matrix_block(rng, m)).collect();
    let symbol = LaurentPoly::block_diagonal(ring.clone(), &blocks).expect("blocks match ring");
    let k = correction(rng, ring, max_n);
    ToeplitzElement::new(symbol, k).expect("generated element is well formed")
}

/// Symbol of span at most 3, for perturbations.
pub fn small_symbol(rng: &mut impl Rng, ring: &BaseRing) -> LaurentPoly {
    let lo = rng.gen_range(-2..=1);
    let len = rng.gen_range(1..=3);
    let d = ring.dim();
    let owner: Vec<usize> = (0..d).map(|x| ring.block_of(x)).collect();
    let coeffs = (0..len)
        .map(|_| {
            ComplexMatrix::from_fn(d, d, |i, j| {
                let v = unit_disc(rng);
                if owner[i] == owner[j] {
                    v
                } else {
                    C64::new(0.0, 0.0)
                }
            })
        })
        .collect();
    LaurentPoly::new(ring.clone(), lo, coeffs).expect("block diagonal coefficients")
}

/// Orthonormal basis of a random `k`-dimensional subspace of `C^n`.
pub fn random_subspace(rng: &mut impl Rng, n: usize, k: usize) -> ComplexMatrix {
    let g = random_matrix(rng, n, k);
    let dec = numkit::svd(&g);
    ComplexMatrix::from_fn(n, k, |i, j| dec.u[(i, j)])
}

/// Random pair of `n x n` projections of equal rank with `||P - Q|| < 1/2`.
pub fn projection_pair(rng: &mut impl Rng) -> (ComplexMatrix, ComplexMatrix) {
    let n = rng.gen_range(1..=12);
    let k = rng.gen_range(0..=n);
    let x = random_subspace(rng, n, k);
    let p = numkit::range_projection(&x, 1e-12);
    let mut t = rng.gen_range(0.0..0.6);
    loop {
        let y = random_matrix(rng, n, k).scale_real(t);
        let q = numkit::range_projection(&(&x + &y), 1e-12);
        if numkit::rank(&q, 1e-8) == k && numkit::spectral_norm(&(&p - &q)) < 0.5 {
            return (p, q);
        }
        t *= 0.5;
    }
}

/// Random finite projection of rank at most 3 below `1 - p`, supported on
/// the first `len` coordinates and inside a single ring block per vector.
pub fn projection_below_complement(rng: &mut impl Rng, p: &Projection, len: usize) -> Projection {
    let ring = p.ring().clone();
    let d = ring.dim();
    let rank = rng.gen_range(1..=3);
    let cp = p.complement();
    let window = cp.window(len);
    let cols: Vec<ComplexMatrix> = (0..rank)
        .map(|_| {
            let block = rng.gen_range(0..ring.num_blocks());
            let x = ComplexMatrix::from_fn(len * d, 1, |i, _| {
                if ring.block_of(i % d) == block {
                    gaussian(rng)
                } else {
                    C64::new(0.0, 0.0)
                }
            });
            &window * &x
        })
        .collect();
    let basis = ComplexMatrix::from_fn(len * d, rank, |i, j| cols[j][(i, 0)]);
    Projection::onto_range(ring, &basis).expect("range of a block-respecting basis")
}
