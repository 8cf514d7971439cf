//! Finitely supported Laurent symbols over a finite-dimensional base ring.
//!
//! A symbol `f(z) = sum_k c_k z^k` carries one `d x d` coefficient per degree,
//! where `d` is the total dimension of the [`BaseRing`]; coefficients are block
//! diagonal with respect to the ring's blocks. The scalar model is the ring
//! with a single block of size one.
//!
//! Besides arithmetic this module holds the classical analytic facts that seed
//! and cross-check the Fredholm engine: winding numbers by root counting,
//! Wiener-Hopf splitting, a certified bound for the sup norm on the unit
//! circle, and truncated inverse symbols.

use std::f64::consts::PI;
use std::fmt;

use rustfft::FftPlanner;
use thiserror::Error;

use crate::numkit::{self, ComplexMatrix, C64};

/// Largest polynomial degree handed to the companion root finder.
pub const MAX_ROOT_DEGREE: usize = 12;
/// Largest block size for which determinants are expanded.
pub const MAX_BLOCK_SIZE: usize = 3;
/// Default distance roots must keep from the unit circle.
pub const DEFAULT_MARGIN: f64 = 0.1;
/// Grid used for the sup-norm bound (raised for long symbols).
pub const SUP_GRID: usize = 1024;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LaurentError {
    #[error("base rings differ: {0} vs {1}")]
    RingMismatch(BaseRing, BaseRing),
    #[error("root {:.6}{:+.6}i has modulus within {margin} of the unit circle", root.re, root.im)]
    RootNearCircle { root: C64, margin: f64 },
    #[error("polynomial degree {0} exceeds the cap of {MAX_ROOT_DEGREE}")]
    DegreeCap(usize),
    #[error("block size {0} exceeds the cap of {MAX_BLOCK_SIZE}")]
    BlockTooLarge(usize),
    #[error("operation needs a scalar ring, got {0}")]
    NotScalar(BaseRing),
    #[error("symbol is identically zero")]
    ZeroSymbol,
    #[error("malformed symbol: {0}")]
    Shape(String),
    #[error("inverse symbol seed did not converge (residual bound {0:e})")]
    SeedFailure(f64),
}

/// Finite-dimensional C*-algebra `M_{n_1} + ... + M_{n_k}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BaseRing {
    block_sizes: Vec<usize>,
}

impl BaseRing {
    pub fn new(block_sizes: Vec<usize>) -> Result<Self, LaurentError> {
        if block_sizes.is_empty() || block_sizes.contains(&0) {
            return Err(LaurentError::Shape(format!(
                "block sizes must be positive and non-empty, got {block_sizes:?}"
            )));
        }
        Ok(Self { block_sizes })
    }

    pub fn scalar() -> Self {
        Self { block_sizes: vec![1] }
    }

    /// Ring with a single block of size `n`.
    pub fn single(n: usize) -> Self {
        assert!(n > 0);
        Self { block_sizes: vec![n] }
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    pub fn num_blocks(&self) -> usize {
        self.block_sizes.len()
    }

    /// Total dimension `d = n_1 + ... + n_k`.
    pub fn dim(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    pub fn is_scalar(&self) -> bool {
        self.block_sizes == [1]
    }

    /// Offset of block `i` inside a `d`-vector.
    pub fn offset(&self, i: usize) -> usize {
        self.block_sizes[..i].iter().sum()
    }

    /// Block containing component `alpha` of a `d`-vector.
    pub fn block_of(&self, alpha: usize) -> usize {
        let mut acc = 0;
        for (i, &n) in self.block_sizes.iter().enumerate() {
            acc += n;
            if alpha < acc {
                return i;
            }
        }
        panic!("component {alpha} outside ring of dimension {}", self.dim());
    }

    /// Zeroes the entries of `m` that connect different blocks.
    pub fn mask_blocks(&self, m: &mut ComplexMatrix) {
        if self.num_blocks() == 1 {
            return;
        }
        let d = self.dim();
        let owner: Vec<usize> = (0..d).map(|a| self.block_of(a)).collect();
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                if owner[i % d] != owner[j % d] {
                    m[(i, j)] = C64::new(0.0, 0.0);
                }
            }
        }
    }

    /// Whether a matrix indexed by (coordinate, component) pairs vanishes
    /// between different blocks, up to `tol`.
    pub fn respects_blocks(&self, m: &ComplexMatrix, tol: f64) -> bool {
        if self.num_blocks() == 1 {
            return true;
        }
        let d = self.dim();
        let owner: Vec<usize> = (0..d).map(|a| self.block_of(a)).collect();
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                if owner[i % d] != owner[j % d] && m[(i, j)].norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn identity(&self) -> ComplexMatrix {
        ComplexMatrix::identity(self.dim())
    }
}

impl fmt::Display for BaseRing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.block_sizes)
    }
}

/// Laurent polynomial with block-diagonal matrix coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentPoly {
    ring: BaseRing,
    lo: i64,
    coeffs: Vec<ComplexMatrix>,
}

fn czero() -> C64 {
    C64::new(0.0, 0.0)
}

impl LaurentPoly {
    /// Builds `sum_k coeffs[k] z^(lo + k)`, trimming exactly-zero end coefficients.
    pub fn new(ring: BaseRing, lo: i64, coeffs: Vec<ComplexMatrix>) -> Result<Self, LaurentError> {
        let d = ring.dim();
        for (k, c) in coeffs.iter().enumerate() {
            if c.rows() != d || c.cols() != d {
                return Err(LaurentError::Shape(format!(
                    "coefficient of degree {} is {}x{}, ring dimension is {d}",
                    lo + k as i64,
                    c.rows(),
                    c.cols()
                )));
            }
            if !ring.respects_blocks(c, 0.0) {
                return Err(LaurentError::Shape(format!(
                    "coefficient of degree {} mixes ring blocks",
                    lo + k as i64
                )));
            }
        }
        Ok(Self::from_parts(ring, lo, coeffs))
    }

    fn from_parts(ring: BaseRing, lo: i64, coeffs: Vec<ComplexMatrix>) -> Self {
        let mut p = Self { ring, lo, coeffs };
        p.trim();
        p
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
        let lead = self.coeffs.iter().take_while(|c| c.is_zero()).count();
        if lead > 0 {
            self.coeffs.drain(..lead);
            self.lo += lead as i64;
        }
        if self.coeffs.is_empty() {
            self.lo = 0;
        }
    }

    /// Scalar symbol `sum_k coeffs[k] z^(lo + k)`.
    pub fn scalar(lo: i64, coeffs: &[C64]) -> Self {
        let coeffs = coeffs.iter().map(|&c| ComplexMatrix::diagonal(&[c])).collect();
        Self::from_parts(BaseRing::scalar(), lo, coeffs)
    }

    /// Scalar symbol with real coefficients.
    pub fn scalar_real(lo: i64, coeffs: &[f64]) -> Self {
        let c: Vec<C64> = coeffs.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::scalar(lo, &c)
    }

    /// Monic scalar polynomial `z^lo * prod (z - r)` times `scale`.
    pub fn from_roots(lo: i64, scale: C64, roots: &[C64]) -> Self {
        let mut c = vec![scale];
        for &r in roots {
            c = poly_mul(&c, &[-r, C64::new(1.0, 0.0)]);
        }
        Self::scalar(lo, &c)
    }

    pub fn zero(ring: BaseRing) -> Self {
        Self {
            ring,
            lo: 0,
            coeffs: Vec::new(),
        }
    }

    pub fn constant(ring: BaseRing, c: ComplexMatrix) -> Result<Self, LaurentError> {
        Self::new(ring, 0, vec![c])
    }

    pub fn identity(ring: BaseRing) -> Self {
        let id = ring.identity();
        Self::from_parts(ring, 0, vec![id])
    }

    /// `z^k` times the ring identity.
    pub fn monomial(ring: BaseRing, k: i64) -> Self {
        let id = ring.identity();
        Self::from_parts(ring, k, vec![id])
    }

    /// Block-diagonal symbol assembled from one symbol per ring block; block
    /// `i` must live over the single-block ring of size `n_i`.
    pub fn block_diagonal(ring: BaseRing, blocks: &[LaurentPoly]) -> Result<Self, LaurentError> {
        if blocks.len() != ring.num_blocks() {
            return Err(LaurentError::Shape(format!(
                "{} block symbols for ring {ring}",
                blocks.len()
            )));
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.ring.dim() != ring.block_sizes()[i] {
                return Err(LaurentError::Shape(format!(
                    "block {i} has dimension {}, ring expects {}",
                    b.ring.dim(),
                    ring.block_sizes()[i]
                )));
            }
        }
        let nonzero: Vec<&LaurentPoly> = blocks.iter().filter(|b| !b.is_zero()).collect();
        if nonzero.is_empty() {
            return Ok(Self::zero(ring));
        }
        let lo = nonzero.iter().map(|b| b.lo).min().unwrap();
        let hi = nonzero.iter().map(|b| b.hi()).max().unwrap();
        let d = ring.dim();
        let mut coeffs = vec![ComplexMatrix::zeros(d, d); (hi - lo + 1) as usize];
        for (i, b) in blocks.iter().enumerate() {
            let off = ring.offset(i);
            for (k, c) in b.coeffs.iter().enumerate() {
                let deg = b.lo + k as i64;
                coeffs[(deg - lo) as usize].add_block(off, off, c, C64::new(1.0, 0.0));
            }
        }
        Ok(Self::from_parts(ring, lo, coeffs))
    }

    pub fn ring(&self) -> &BaseRing {
        &self.ring
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Lowest degree with a nonzero coefficient (0 for the zero symbol).
    pub fn lo(&self) -> i64 {
        self.lo
    }

    /// Highest degree with a nonzero coefficient (-1 for the zero symbol).
    pub fn hi(&self) -> i64 {
        self.lo + self.coeffs.len() as i64 - 1
    }

    /// `hi - lo`, the degree of the polynomial part.
    pub fn span(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn coeffs(&self) -> &[ComplexMatrix] {
        &self.coeffs
    }

    pub fn coeff(&self, k: i64) -> Option<&ComplexMatrix> {
        if k < self.lo {
            return None;
        }
        self.coeffs.get((k - self.lo) as usize)
    }

    /// Scalar coefficient; panics unless the ring has dimension one.
    pub fn scalar_coeff(&self, k: i64) -> C64 {
        assert_eq!(self.ring.dim(), 1, "scalar_coeff on a matrix symbol");
        self.coeff(k).map_or(czero(), |c| c[(0, 0)])
    }

    /// Largest positive degree present (0 if none): lower bandwidth of `T_f`.
    pub fn positive_reach(&self) -> usize {
        if self.is_zero() {
            0
        } else {
            self.hi().max(0) as usize
        }
    }

    /// Largest negative degree magnitude present: upper bandwidth of `T_f`.
    pub fn negative_reach(&self) -> usize {
        if self.is_zero() {
            0
        } else {
            (-self.lo).max(0) as usize
        }
    }

    fn check_ring(&self, other: &Self) -> Result<(), LaurentError> {
        if self.ring != other.ring {
            return Err(LaurentError::RingMismatch(self.ring.clone(), other.ring.clone()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, LaurentError> {
        self.combine(other, C64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, LaurentError> {
        self.combine(other, C64::new(-1.0, 0.0))
    }

    fn combine(&self, other: &Self, s: C64) -> Result<Self, LaurentError> {
        self.check_ring(other)?;
        if other.is_zero() {
            return Ok(self.clone());
        }
        if self.is_zero() {
            return Ok(other.scale(s));
        }
        let lo = self.lo.min(other.lo);
        let hi = self.hi().max(other.hi());
        let d = self.ring.dim();
        let mut coeffs = vec![ComplexMatrix::zeros(d, d); (hi - lo + 1) as usize];
        for (k, c) in self.coeffs.iter().enumerate() {
            coeffs[(self.lo - lo) as usize + k].add_block(0, 0, c, C64::new(1.0, 0.0));
        }
        for (k, c) in other.coeffs.iter().enumerate() {
            coeffs[(other.lo - lo) as usize + k].add_block(0, 0, c, s);
        }
        Ok(Self::from_parts(self.ring.clone(), lo, coeffs))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_parts(
            self.ring.clone(),
            self.lo,
            self.coeffs.iter().map(|c| c.scale(s)).collect(),
        )
    }

    /// Coefficient convolution: `(fg)(z) = f(z) g(z)`.
    pub fn mul(&self, other: &Self) -> Result<Self, LaurentError> {
        self.check_ring(other)?;
        if self.is_zero() || other.is_zero() {
            return Ok(Self::zero(self.ring.clone()));
        }
        let d = self.ring.dim();
        let n = self.coeffs.len() + other.coeffs.len() - 1;
        let lo = self.lo + other.lo;
        if d == 1 {
            let a: Vec<C64> = self.coeffs.iter().map(|c| c[(0, 0)]).collect();
            let b: Vec<C64> = other.coeffs.iter().map(|c| c[(0, 0)]).collect();
            let prod = poly_mul(&a, &b);
            return Ok(Self::scalar(lo, &prod));
        }
        let mut coeffs = vec![ComplexMatrix::zeros(d, d); n];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                let prod = a * b;
                coeffs[i + j].add_block(0, 0, &prod, C64::new(1.0, 0.0));
            }
        }
        Ok(Self::from_parts(self.ring.clone(), lo, coeffs))
    }

    /// Adjoint symbol: `c_k -> c_{-k}^*`, so it evaluates to `f(z)^*` on the circle.
    pub fn adjoint(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let coeffs: Vec<ComplexMatrix> = self.coeffs.iter().rev().map(|c| c.adjoint()).collect();
        Self::from_parts(self.ring.clone(), -self.hi(), coeffs)
    }

    pub fn eval(&self, z: C64) -> ComplexMatrix {
        let d = self.ring.dim();
        let mut acc = ComplexMatrix::zeros(d, d);
        if self.is_zero() {
            return acc;
        }
        // Horner in z over the polynomial part, then multiply by z^lo.
        for c in self.coeffs.iter().rev() {
            acc = &acc.scale(z) + c;
        }
        acc.scale(z.powi(self.lo as i32))
    }

    /// Drops coefficients whose spectral norm is at or below `threshold`,
    /// including interior ones.
    pub fn chopped(&self, threshold: f64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| {
                if c.max_abs() <= threshold {
                    ComplexMatrix::zeros(c.rows(), c.cols())
                } else {
                    c.clone()
                }
            })
            .collect();
        Self::from_parts(self.ring.clone(), self.lo, coeffs)
    }

    /// Restriction to ring block `i`, as a symbol over `BaseRing::single(n_i)`.
    pub fn block(&self, i: usize) -> Self {
        let n = self.ring.block_sizes()[i];
        let off = self.ring.offset(i);
        let coeffs = self.coeffs.iter().map(|c| c.submatrix(off, off, n, n)).collect();
        Self::from_parts(BaseRing::single(n), self.lo, coeffs)
    }

    /// Scalar symbol of entry `(r, c)` of a single-block symbol.
    pub fn entry(&self, r: usize, c: usize) -> Self {
        let coeffs: Vec<C64> = self.coeffs.iter().map(|m| m[(r, c)]).collect();
        Self::scalar(self.lo, &coeffs)
    }

    /// Determinant of a single-block symbol by Leibniz expansion.
    pub fn determinant(&self) -> Result<Self, LaurentError> {
        if self.ring.num_blocks() != 1 {
            return Err(LaurentError::Shape("determinant needs a single-block symbol".into()));
        }
        let n = self.ring.dim();
        if n > MAX_BLOCK_SIZE {
            return Err(LaurentError::BlockTooLarge(n));
        }
        if n == 1 {
            return Ok(self.clone());
        }
        let entries: Vec<Vec<Self>> = (0..n).map(|r| (0..n).map(|c| self.entry(r, c)).collect()).collect();
        let det = leibniz(&entries)?;
        Ok(det.chopped_relative(1e-13))
    }

    /// Adjugate of a single-block symbol: `F adj(F) = det(F) I`.
    pub fn adjugate(&self) -> Result<Self, LaurentError> {
        let n = self.ring.dim();
        if self.ring.num_blocks() != 1 {
            return Err(LaurentError::Shape("adjugate needs a single-block symbol".into()));
        }
        if n > MAX_BLOCK_SIZE {
            return Err(LaurentError::BlockTooLarge(n));
        }
        if n == 1 {
            return Ok(Self::identity(self.ring.clone()));
        }
        let entries: Vec<Vec<Self>> = (0..n).map(|r| (0..n).map(|c| self.entry(r, c)).collect()).collect();
        let mut cof: Vec<Vec<Self>> = Vec::with_capacity(n);
        for r in 0..n {
            let mut row = Vec::with_capacity(n);
            for c in 0..n {
                let minor: Vec<Vec<Self>> = (0..n)
                    .filter(|&i| i != r)
                    .map(|i| (0..n).filter(|&j| j != c).map(|j| entries[i][j].clone()).collect())
                    .collect();
                let m = leibniz(&minor)?;
                row.push(if (r + c) % 2 == 0 {
                    m
                } else {
                    m.scale(C64::new(-1.0, 0.0))
                });
            }
            cof.push(row);
        }
        // adj = cofactor transpose
        let lo = cof.iter().flatten().filter(|p| !p.is_zero()).map(|p| p.lo).min();
        let hi = cof.iter().flatten().filter(|p| !p.is_zero()).map(|p| p.hi()).max();
        let (Some(lo), Some(hi)) = (lo, hi) else {
            return Ok(Self::zero(self.ring.clone()));
        };
        let mut coeffs = vec![ComplexMatrix::zeros(n, n); (hi - lo + 1) as usize];
        for (r, row) in cof.iter().enumerate() {
            for (c, p) in row.iter().enumerate() {
                for (k, m) in p.coeffs.iter().enumerate() {
                    coeffs[(p.lo - lo) as usize + k][(c, r)] = m[(0, 0)];
                }
            }
        }
        Ok(Self::from_parts(self.ring.clone(), lo, coeffs))
    }

    fn chopped_relative(&self, rel: f64) -> Self {
        let top = self.coeffs.iter().map(|c| c.max_abs()).fold(0.0, f64::max);
        self.chopped(rel * top)
    }

    /// Per-coefficient spectral norms, block-diagonal aware.
    fn coeff_norms(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| block_spectral_norm(&self.ring, c)).collect()
    }

    /// Certified upper bound for `max_{|z|=1} ||f(z)||`.
    ///
    /// At a maximiser the real pairing `Re <u, f v>` peaks, so its value at
    /// the nearest of `N` grid points drops by at most
    /// `(pi / N)^2 / 2 * sum k^2 ||c_k||`. The bound is linear in the
    /// coefficient norms, hence subadditive for symbols sharing a grid size
    /// (span below `SUP_GRID / 8`).
    pub fn sup_norm_upper(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let curvature: f64 = self
            .coeff_norms()
            .iter()
            .enumerate()
            .map(|(k, n)| {
                let deg = (self.lo + k as i64) as f64;
                deg * deg * n
            })
            .sum();
        let grid = sup_grid_size(self.span());
        let step = PI / grid as f64;
        self.grid_max(grid) + 0.5 * curvature * step * step
    }

    /// Largest value of `||f(z)||` over the `n`-th roots of unity.
    pub fn grid_max(&self, n: usize) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        if self.span() >= n {
            return (0..n)
                .map(|j| {
                    let z = C64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64);
                    block_spectral_norm(&self.ring, &self.eval(z))
                })
                .fold(0.0, f64::max);
        }
        let fft = FftPlanner::new().plan_fft_inverse(n);
        // Values of entry (a, b) at every grid point: f(w^j) = sum_m c_m w^(jm)
        // is an inverse DFT of the coefficients placed at m mod n.
        let entry = |a: usize, b: usize| -> Vec<C64> {
            let mut buf = vec![C64::new(0.0, 0.0); n];
            for (k, c) in self.coeffs.iter().enumerate() {
                let m = (self.lo + k as i64).rem_euclid(n as i64) as usize;
                buf[m] += c[(a, b)];
            }
            fft.process(&mut buf);
            buf
        };
        let mut best = vec![0.0f64; n];
        for (i, &size) in self.ring.block_sizes().iter().enumerate() {
            let off = self.ring.offset(i);
            let vals: Vec<Vec<C64>> = (0..size * size)
                .map(|e| entry(off + e / size, off + e % size))
                .collect();
            for (j, slot) in best.iter_mut().enumerate() {
                let norm = match size {
                    1 => vals[0][j].norm(),
                    2 => norm_2x2(vals[0][j], vals[1][j], vals[2][j], vals[3][j]),
                    _ => numkit::spectral_norm(&ComplexMatrix::from_fn(size, size, |r, c| vals[r * size + c][j])),
                };
                *slot = slot.max(norm);
            }
        }
        best.into_iter().fold(0.0, f64::max)
    }

    /// Roots of the polynomial part `z^(-lo) f(z)` of a scalar symbol.
    pub fn roots(&self) -> Result<Vec<C64>, LaurentError> {
        if self.ring.dim() != 1 {
            return Err(LaurentError::NotScalar(self.ring.clone()));
        }
        if self.is_zero() {
            return Err(LaurentError::ZeroSymbol);
        }
        let c: Vec<C64> = self.coeffs.iter().map(|m| m[(0, 0)]).collect();
        if c.len() - 1 > MAX_ROOT_DEGREE {
            return Err(LaurentError::DegreeCap(c.len() - 1));
        }
        Ok(polynomial_roots(&c))
    }

    /// Winding number of each block's determinant around the origin.
    ///
    /// With `det = z^lo P(z)`, the winding is `lo` plus the number of roots of
    /// `P` inside the unit disc.
    pub fn winding_number(&self, margin: f64) -> Result<Vec<i64>, LaurentError> {
        (0..self.ring.num_blocks())
            .map(|i| {
                let det = self.block(i).determinant()?;
                scalar_winding(&det, margin)
            })
            .collect()
    }

    /// Wiener-Hopf splitting `f = f_minus * z^w * f_plus` of a scalar symbol.
    pub fn wiener_hopf_factorize(&self, margin: f64) -> Result<WienerHopf, LaurentError> {
        if self.ring.dim() != 1 {
            return Err(LaurentError::NotScalar(self.ring.clone()));
        }
        let roots = self.roots()?;
        check_margin(&roots, margin)?;
        let lead = self.coeffs.last().unwrap()[(0, 0)];
        let (inside, outside): (Vec<C64>, Vec<C64>) = roots.iter().partition(|r| r.norm() < 1.0);
        // f_plus = lead * prod (z - s), f_minus = prod (1 - r / z)
        let mut plus = vec![lead];
        for &s in &outside {
            plus = poly_mul(&plus, &[-s, C64::new(1.0, 0.0)]);
        }
        // In u = 1/z: prod (1 - r u), stored by ascending power of u.
        let mut minus_u = vec![C64::new(1.0, 0.0)];
        for &r in &inside {
            minus_u = poly_mul(&minus_u, &[C64::new(1.0, 0.0), -r]);
        }
        let minus_z: Vec<C64> = minus_u.iter().rev().copied().collect();
        let winding = self.lo + inside.len() as i64;
        let mut plus_poly = Self::scalar(0, &plus);
        let minus_poly = Self::scalar(-(minus_u.len() as i64 - 1), &minus_z);
        // Least-squares fix of the overall constant against the input.
        let rebuilt = minus_poly
            .mul(&Self::monomial(BaseRing::scalar(), winding))?
            .mul(&plus_poly)?;
        let (mut num, mut den) = (czero(), 0.0);
        for k in self.lo..=self.hi() {
            let r = rebuilt.scalar_coeff(k);
            num += r.conj() * self.scalar_coeff(k);
            den += r.norm_sqr();
        }
        if den > 0.0 {
            plus_poly = plus_poly.scale(num / den);
        }
        Ok(WienerHopf {
            minus: minus_poly,
            winding,
            plus: plus_poly,
            inside,
            outside,
        })
    }
}

/// `f = minus * z^winding * plus`; `plus` has its roots outside the closed
/// disc and `minus` is a polynomial in `1/z` whose roots (in `1/z`) are too.
#[derive(Debug, Clone)]
pub struct WienerHopf {
    pub minus: LaurentPoly,
    pub winding: i64,
    pub plus: LaurentPoly,
    pub inside: Vec<C64>,
    pub outside: Vec<C64>,
}

impl WienerHopf {
    pub fn product(&self) -> LaurentPoly {
        self.minus
            .mul(&LaurentPoly::monomial(BaseRing::scalar(), self.winding))
            .and_then(|m| m.mul(&self.plus))
            .expect("scalar rings")
    }
}

fn sup_grid_size(span: usize) -> usize {
    let want = 8 * (span + 1);
    SUP_GRID.max(want.next_power_of_two())
}

/// Largest singular value of `[[a, b], [c, d]]`.
fn norm_2x2(a: C64, b: C64, c: C64, d: C64) -> f64 {
    let fro = a.norm_sqr() + b.norm_sqr() + c.norm_sqr() + d.norm_sqr();
    let det = (a * d - b * c).norm();
    let disc = ((fro - 2.0 * det) * (fro + 2.0 * det)).max(0.0);
    ((fro + disc.sqrt()) / 2.0).sqrt()
}

fn block_spectral_norm(ring: &BaseRing, m: &ComplexMatrix) -> f64 {
    if m.rows() == 1 {
        return m[(0, 0)].norm();
    }
    (0..ring.num_blocks())
        .map(|i| {
            let n = ring.block_sizes()[i];
            let off = ring.offset(i);
            let b = m.submatrix(off, off, n, n);
            match n {
                1 => b[(0, 0)].norm(),
                2 => norm_2x2(b[(0, 0)], b[(0, 1)], b[(1, 0)], b[(1, 1)]),
                _ => numkit::spectral_norm(&b),
            }
        })
        .fold(0.0, f64::max)
}

fn leibniz(entries: &[Vec<LaurentPoly>]) -> Result<LaurentPoly, LaurentError> {
    let n = entries.len();
    let mut total = LaurentPoly::zero(BaseRing::scalar());
    for perm in permutations(n) {
        let mut term = LaurentPoly::identity(BaseRing::scalar());
        for (r, &c) in perm.iter().enumerate() {
            term = term.mul(&entries[r][c])?;
        }
        if permutation_sign(&perm) < 0 {
            term = term.scale(C64::new(-1.0, 0.0));
        }
        total = total.add(&term)?;
    }
    Ok(total)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn permutation_sign(p: &[usize]) -> i32 {
    let mut inversions = 0;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i] > p[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

fn check_margin(roots: &[C64], margin: f64) -> Result<(), LaurentError> {
    for &r in roots {
        if (r.norm() - 1.0).abs() < margin {
            return Err(LaurentError::RootNearCircle { root: r, margin });
        }
    }
    Ok(())
}

fn scalar_winding(f: &LaurentPoly, margin: f64) -> Result<i64, LaurentError> {
    let roots = f.roots()?;
    check_margin(&roots, margin)?;
    Ok(f.lo() + roots.iter().filter(|r| r.norm() < 1.0).count() as i64)
}

/// Product of coefficient vectors (ascending powers).
pub(crate) fn poly_mul(a: &[C64], b: &[C64]) -> Vec<C64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![czero(); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x.re == 0.0 && x.im == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn horner(c: &[C64], z: C64) -> C64 {
    c.iter().rev().fold(czero(), |acc, &x| acc * z + x)
}

/// Roots of `sum c_k z^k` (ascending) via companion eigenvalues, Newton polished.
pub(crate) fn polynomial_roots(c: &[C64]) -> Vec<C64> {
    let deg = c.len() - 1;
    if deg == 0 {
        return Vec::new();
    }
    let lead = c[deg];
    let mut comp = ComplexMatrix::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = C64::new(1.0, 0.0);
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -c[i] / lead;
    }
    let mut roots = numkit::eigenvalues(&comp).unwrap_or_default();
    let deriv: Vec<C64> = (1..=deg).map(|k| c[k] * k as f64).collect();
    for r in &mut roots {
        for _ in 0..4 {
            let fp = horner(&deriv, *r);
            if fp.norm() < 1e-12 {
                break;
            }
            let step = horner(c, *r) / fp;
            if !step.re.is_finite() || !step.im.is_finite() || step.norm() > 1e-3 * (1.0 + r.norm()) {
                break;
            }
            *r -= step;
        }
    }
    roots
}

/// Power series coefficients `g_0..=g_n` of `1/p` for a polynomial `p` with
/// `p(0) != 0` (ascending coefficients).
pub(crate) fn reciprocal_series(p: &[C64], n: usize) -> Vec<C64> {
    let mut g = vec![czero(); n + 1];
    let inv0 = C64::new(1.0, 0.0) / p[0];
    g[0] = inv0;
    for k in 1..=n {
        let mut acc = czero();
        for j in 1..p.len().min(k + 1) {
            acc += p[j] * g[k - j];
        }
        g[k] = -acc * inv0;
    }
    g
}

/// Truncated inverse symbol `G ~ F^{-1}` together with certified residual
/// bounds for `FG - 1` and `GF - 1`.
#[derive(Debug, Clone)]
pub struct InverseSeed {
    pub symbol: LaurentPoly,
    pub residual_bound: f64,
    /// Determinant winding per ring block, from the root split.
    pub winding: Vec<i64>,
}

/// Builds an approximate inverse symbol block by block: the determinant is
/// split by Wiener-Hopf, `1/f_plus` and `1/f_minus` are expanded as power
/// series (in `z` and `1/z`), and the adjugate supplies the matrix part.
/// Series lengths grow until the certified residual drops to `target`.
pub fn inverse_seed(f: &LaurentPoly, margin: f64, target: f64) -> Result<InverseSeed, LaurentError> {
    if f.is_zero() {
        return Err(LaurentError::ZeroSymbol);
    }
    let ring = f.ring().clone();
    let mut blocks = Vec::with_capacity(ring.num_blocks());
    let mut winding = Vec::with_capacity(ring.num_blocks());
    let mut worst = 0.0f64;
    for i in 0..ring.num_blocks() {
        let fb = f.block(i);
        let det = fb.determinant()?;
        if det.is_zero() {
            return Err(LaurentError::ZeroSymbol);
        }
        let wh = det.wiener_hopf_factorize(margin)?;
        let adj = fb.adjugate()?;
        let (g, res) = block_inverse(&fb, &adj, &wh, target)?;
        worst = worst.max(res);
        winding.push(wh.winding);
        blocks.push(g);
    }
    Ok(InverseSeed {
        symbol: LaurentPoly::block_diagonal(ring, &blocks)?,
        residual_bound: worst,
        winding,
    })
}

fn block_inverse(
    fb: &LaurentPoly,
    adj: &LaurentPoly,
    wh: &WienerHopf,
    target: f64,
) -> Result<(LaurentPoly, f64), LaurentError> {
    let plus: Vec<C64> = (0..=wh.plus.hi()).map(|k| wh.plus.scalar_coeff(k)).collect();
    // minus in u = 1/z, ascending powers of u
    let minus_u: Vec<C64> = (0..=-wh.minus.lo()).map(|k| wh.minus.scalar_coeff(-k)).collect();
    let rate_plus = wh.outside.iter().map(|s| 1.0 / s.norm()).fold(0.0, f64::max);
    let rate_minus = wh.inside.iter().map(|r| r.norm()).fold(0.0, f64::max);
    let length = |rate: f64, scale: f64| -> usize {
        if rate <= 1e-3 {
            return 4;
        }
        let n = (target.ln() / rate.ln()) * scale;
        (n.ceil() as usize).clamp(4, 4000)
    };
    let n = fb.ring().dim();
    let id = LaurentPoly::identity(fb.ring().clone());
    let mut scale = 1.0;
    let mut last = f64::INFINITY;
    for _ in 0..24 {
        let np = if wh.outside.is_empty() {
            0
        } else {
            length(rate_plus, scale)
        };
        let nm = if wh.inside.is_empty() {
            0
        } else {
            length(rate_minus, scale)
        };
        let gp = reciprocal_series(&plus, np);
        let gm_u = reciprocal_series(&minus_u, nm);
        let gm_z: Vec<C64> = gm_u.iter().rev().copied().collect();
        let g_scalar = LaurentPoly::scalar(-(nm as i64), &gm_z)
            .mul(&LaurentPoly::scalar(-wh.winding, &[C64::new(1.0, 0.0)]))?
            .mul(&LaurentPoly::scalar(0, &gp))?;
        let g_block = if n == 1 {
            g_scalar
        } else {
            let lifted = LaurentPoly::new(
                BaseRing::single(n),
                g_scalar.lo(),
                g_scalar
                    .coeffs()
                    .iter()
                    .map(|c| ComplexMatrix::identity(n).scale(c[(0, 0)]))
                    .collect(),
            )?;
            adj.mul(&lifted)?
        };
        let right = fb.mul(&g_block)?.sub(&id)?.sup_norm_upper();
        let left = g_block.mul(fb)?.sub(&id)?.sup_norm_upper();
        let res = right.max(left);
        if res <= target {
            return Ok((g_block, res));
        }
        if np >= 4000 && nm >= 4000 {
            last = res;
            break;
        }
        last = res;
        scale *= 1.25;
    }
    Err(LaurentError::SeedFailure(last))
}
