//! The operator model `a = T_f + K`.
//!
//! `T_f` is the block Toeplitz operator of a Laurent symbol on
//! `l^2(N) (x) C^d` and `K` a finite matrix in the top-left corner. Scalar
//! indices are interleaved: coordinate `i`, component `alpha` sits at
//! `i * d + alpha`. Symbol-zero elements form the finite-type ideal; the
//! coordinate projections `P_n` are its approximate unit.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

use crate::fredholm;
use crate::laurent::{BaseRing, LaurentError, LaurentPoly};
use crate::numkit::{self, ComplexMatrix, NumError, C64};

/// Entries at or below this magnitude are dropped after every product.
pub const TRIM: f64 = 1e-14;
/// Tolerance for projection identities.
pub const PROJECTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgebraError {
    #[error("base rings differ: {0} vs {1}")]
    RingMismatch(BaseRing, BaseRing),
    #[error("malformed element: {0}")]
    Shape(String),
    #[error("projection is not finite")]
    NotFinite,
    #[error("not a projection (defect {0:e})")]
    NotProjection(f64),
    #[error("epsilon {0} must be below 1/2")]
    EpsilonTooLarge(f64),
    #[error(transparent)]
    Laurent(#[from] LaurentError),
    #[error(transparent)]
    Num(#[from] NumError),
}

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

/// `T_f + K` with `K` an `(N d) x (N d)` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzElement {
    symbol: LaurentPoly,
    correction: ComplexMatrix,
}

impl ToeplitzElement {
    /// Validates shapes and ring structure, then trims the correction.
    pub fn new(symbol: LaurentPoly, correction: ComplexMatrix) -> Result<Self, AlgebraError> {
        let ring = symbol.ring().clone();
        let d = ring.dim();
        if !correction.is_square() || !correction.rows().is_multiple_of(d) {
            return Err(AlgebraError::Shape(format!(
                "correction is {}x{}, expected square with side divisible by {d}",
                correction.rows(),
                correction.cols()
            )));
        }
        if !ring.respects_blocks(&correction, 0.0) {
            return Err(AlgebraError::Shape("correction mixes ring blocks".into()));
        }
        Ok(Self::from_parts(symbol, correction))
    }

    fn from_parts(symbol: LaurentPoly, mut correction: ComplexMatrix) -> Self {
        correction.chop(TRIM);
        let d = symbol.ring().dim();
        let ext = correction.occupied_extent();
        let n = ext.div_ceil(d);
        if n * d != correction.rows() {
            correction = correction.resized(n * d, n * d);
        }
        Self { symbol, correction }
    }

    pub fn from_symbol(symbol: LaurentPoly) -> Self {
        Self {
            symbol,
            correction: ComplexMatrix::zeros(0, 0),
        }
    }

    /// Symbol-zero element with the given correction.
    pub fn finite(ring: BaseRing, correction: ComplexMatrix) -> Result<Self, AlgebraError> {
        Self::new(LaurentPoly::zero(ring), correction)
    }

    pub fn identity(ring: BaseRing) -> Self {
        Self::from_symbol(LaurentPoly::identity(ring))
    }

    pub fn zero(ring: BaseRing) -> Self {
        Self::from_symbol(LaurentPoly::zero(ring))
    }

    /// `T_{z^k}` (times the ring identity).
    pub fn shift(ring: BaseRing, k: i64) -> Self {
        Self::from_symbol(LaurentPoly::monomial(ring, k))
    }

    pub fn ring(&self) -> &BaseRing {
        self.symbol.ring()
    }

    pub fn symbol(&self) -> &LaurentPoly {
        &self.symbol
    }

    pub fn correction(&self) -> &ComplexMatrix {
        &self.correction
    }

    /// Number of module coordinates spanned by the correction.
    pub fn support(&self) -> usize {
        self.correction.rows() / self.ring().dim()
    }

    /// Member of the finite-type ideal.
    pub fn is_finite(&self) -> bool {
        self.symbol.is_zero()
    }

    fn check_ring(&self, other: &Self) -> Result<(), AlgebraError> {
        if self.ring() != other.ring() {
            return Err(AlgebraError::RingMismatch(self.ring().clone(), other.ring().clone()));
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.check_ring(other)?;
        Ok(self.combine(other, one()))
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.check_ring(other)?;
        Ok(self.combine(other, -one()))
    }

    fn combine(&self, other: &Self, s: C64) -> Self {
        let symbol = if s == one() {
            self.symbol.add(&other.symbol)
        } else {
            self.symbol.add(&other.symbol.scale(s))
        }
        .expect("rings checked");
        let n = self.correction.rows().max(other.correction.rows());
        let mut k = self.correction.resized(n, n);
        k.add_block(0, 0, &other.correction, s);
        Self::from_parts(symbol, k)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_parts(self.symbol.scale(s), self.correction.scale(s))
    }

    pub fn adjoint(&self) -> Self {
        Self {
            symbol: self.symbol.adjoint(),
            correction: self.correction.adjoint(),
        }
    }

    /// Exact product through `T_f T_g = T_{fg} - H_f H_{g~}`.
    pub fn checked_mul(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.check_ring(other)?;
        Ok(self.mul_unchecked(other))
    }

    fn mul_unchecked(&self, other: &Self) -> Self {
        let d = self.ring().dim();
        let f = &self.symbol;
        let g = &other.symbol;
        let symbol = f.mul(g).expect("rings checked");
        let na = self.support();
        let nb = other.support();

        let hank_rows = f.positive_reach();
        let hank_cols = g.negative_reach();
        let mut n_out = na.max(nb);
        if hank_rows > 0 && hank_cols > 0 {
            n_out = n_out.max(hank_rows).max(hank_cols);
        }
        if nb > 0 && !f.is_zero() {
            n_out = n_out.max(nb + f.positive_reach());
        }
        if na > 0 && !g.is_zero() {
            n_out = n_out.max(na + g.negative_reach());
        }
        let mut out = ComplexMatrix::zeros(n_out * d, n_out * d);

        if hank_rows > 0 && hank_cols > 0 {
            hankel_product_into(&mut out, f, g, d);
        }
        if nb > 0 && !f.is_zero() {
            let tk = toeplitz_times(f, &other.correction, n_out);
            out.add_block(0, 0, &tk, one());
        }
        if na > 0 && !g.is_zero() {
            let kt = times_toeplitz(&self.correction, g, n_out);
            out.add_block(0, 0, &kt, one());
        }
        if na > 0 && nb > 0 {
            let n = na.max(nb) * d;
            let kk = &self.correction.resized(n, n) * &other.correction.resized(n, n);
            out.add_block(0, 0, &kk, one());
        }
        Self::from_parts(symbol, out)
    }

    /// Top-left `M x M` block corner of the infinite matrix.
    pub fn truncate(&self, m: usize) -> ComplexMatrix {
        let d = self.ring().dim();
        let mut out = self.correction.resized(m * d, m * d);
        for (k, c) in self.symbol.coeffs().iter().enumerate() {
            let deg = self.symbol.lo() + k as i64;
            for j in 0..m {
                let i = j as i64 + deg;
                if i < 0 || i >= m as i64 {
                    continue;
                }
                out.add_block(i as usize * d, j * d, c, one());
            }
        }
        out
    }

    /// Certified upper bound on the operator norm.
    pub fn norm_upper(&self) -> f64 {
        self.symbol.sup_norm_upper() + block_spectral_norm(self.ring(), &self.correction)
    }

    /// Norm of the `M x M` truncation; never exceeds the true norm.
    pub fn norm_lower(&self, m: usize) -> f64 {
        numkit::spectral_norm(&self.truncate(m))
    }

    /// Same element with symbol coefficients at or below `threshold` removed.
    pub fn chop_symbol(&self, threshold: f64) -> Self {
        Self {
            symbol: self.symbol.chopped(threshold),
            correction: self.correction.clone(),
        }
    }

    /// Restriction to ring block `i`, over `BaseRing::single(n_i)`.
    pub fn block_part(&self, i: usize) -> Self {
        Self::from_parts(self.symbol.block(i), extract_block(self.ring(), &self.correction, i))
    }

    /// Direct sum of one single-block element per ring block.
    pub fn direct_sum(ring: &BaseRing, parts: &[Self]) -> Result<Self, AlgebraError> {
        let symbols: Vec<LaurentPoly> = parts.iter().map(|p| p.symbol.clone()).collect();
        let symbol = LaurentPoly::block_diagonal(ring.clone(), &symbols)?;
        let corrections: Vec<ComplexMatrix> = parts.iter().map(|p| p.correction.clone()).collect();
        Ok(Self::from_parts(symbol, embed_blocks(ring, &corrections)))
    }

    /// Window of rows `[r0, r0 + nr)` and columns `[c0, c0 + nc)`, in module
    /// coordinates.
    pub fn window(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> ComplexMatrix {
        let d = self.ring().dim();
        let mut out = self.correction.submatrix(r0 * d, c0 * d, nr * d, nc * d);
        for (k, c) in self.symbol.coeffs().iter().enumerate() {
            let deg = self.symbol.lo() + k as i64;
            for jj in 0..nc {
                let i = (c0 + jj) as i64 + deg - r0 as i64;
                if i < 0 || i >= nr as i64 {
                    continue;
                }
                out.add_block(i as usize * d, jj * d, c, one());
            }
        }
        out
    }
}

/// `(T_f K)` restricted to the first `out_rows` module rows; `K` has
/// `support * d` rows and any number of columns.
fn toeplitz_times(f: &LaurentPoly, k: &ComplexMatrix, out_rows: usize) -> ComplexMatrix {
    let d = f.ring().dim();
    let nk = k.rows() / d;
    let cols = k.cols();
    let dense = out_rows * nk * d * d * cols;
    if dense > 1 << 18 && f.coeffs().len() * 8 >= out_rows {
        let t = ToeplitzElement::from_symbol(f.clone()).window(0, 0, out_rows, nk);
        return &t * k;
    }
    let mut out = ComplexMatrix::zeros(out_rows * d, cols);
    for (idx, c) in f.coeffs().iter().enumerate() {
        let m = f.lo() + idx as i64;
        for kk in 0..nk {
            let i = kk as i64 + m;
            if i < 0 || i >= out_rows as i64 {
                continue;
            }
            let i = i as usize;
            for a in 0..d {
                for b in 0..d {
                    let s = c[(a, b)];
                    if s.re == 0.0 && s.im == 0.0 {
                        continue;
                    }
                    let src = k.row(kk * d + b).to_vec();
                    let dst = out.row_mut(i * d + a);
                    for (x, y) in dst.iter_mut().zip(&src) {
                        *x += s * y;
                    }
                }
            }
        }
    }
    out
}

/// `(K T_g)` restricted to the first `out_cols` module columns.
fn times_toeplitz(k: &ComplexMatrix, g: &LaurentPoly, out_cols: usize) -> ComplexMatrix {
    toeplitz_times(&g.adjoint(), &k.adjoint(), out_cols).adjoint()
}

/// Adds `-H_f H_{g~}` into `out`: block `(i, j)` is
/// `-sum_l c^f_{i+l+1} c^g_{-(l+j+1)}`.
fn hankel_product_into(out: &mut ComplexMatrix, f: &LaurentPoly, g: &LaurentPoly, d: usize) {
    let rows = f.positive_reach();
    let cols = g.negative_reach();
    for i in 0..rows {
        for j in 0..cols {
            let lmax = (rows - i).min(cols - j);
            for l in 0..lmax {
                let (Some(a), Some(b)) = (f.coeff((i + l + 1) as i64), g.coeff(-((l + j + 1) as i64))) else {
                    continue;
                };
                let prod = a * b;
                out.add_block(i * d, j * d, &prod, -one());
            }
        }
    }
}

/// Entries of `m` belonging to ring block `i`, reindexed over the block.
fn extract_block(ring: &BaseRing, m: &ComplexMatrix, i: usize) -> ComplexMatrix {
    let d = ring.dim();
    let n = ring.block_sizes()[i];
    let off = ring.offset(i);
    let coords = m.rows() / d;
    let mut out = ComplexMatrix::zeros(coords * n, coords * n);
    for r in 0..coords {
        for c in 0..coords {
            for a in 0..n {
                for b in 0..n {
                    out[(r * n + a, c * n + b)] = m[(r * d + off + a, c * d + off + b)];
                }
            }
        }
    }
    out
}

/// Inverse of [`extract_block`] over all blocks at once.
fn embed_blocks(ring: &BaseRing, parts: &[ComplexMatrix]) -> ComplexMatrix {
    let d = ring.dim();
    let coords = parts
        .iter()
        .zip(ring.block_sizes())
        .map(|(p, &n)| p.rows() / n)
        .max()
        .unwrap_or(0);
    let mut out = ComplexMatrix::zeros(coords * d, coords * d);
    for (i, part) in parts.iter().enumerate() {
        let n = ring.block_sizes()[i];
        let off = ring.offset(i);
        let k = part.rows() / n;
        for r in 0..k {
            for c in 0..k {
                for a in 0..n {
                    for b in 0..n {
                        out[(r * d + off + a, c * d + off + b)] = part[(r * n + a, c * n + b)];
                    }
                }
            }
        }
    }
    out
}

/// Spectral norm of a matrix that respects the ring blocks, computed block
/// by block.
pub fn block_spectral_norm(ring: &BaseRing, m: &ComplexMatrix) -> f64 {
    if ring.num_blocks() == 1 {
        return numkit::spectral_norm(m);
    }
    (0..ring.num_blocks())
        .map(|i| numkit::spectral_norm(&extract_block(ring, m, i)))
        .fold(0.0, f64::max)
}

/// Applies `f` to each block of a square block-respecting matrix and
/// reassembles; `f` must preserve the shape.
pub fn map_blocks(
    ring: &BaseRing,
    m: &ComplexMatrix,
    mut f: impl FnMut(&ComplexMatrix) -> ComplexMatrix,
) -> ComplexMatrix {
    if ring.num_blocks() == 1 {
        return f(m);
    }
    let parts: Vec<ComplexMatrix> = (0..ring.num_blocks()).map(|i| f(&extract_block(ring, m, i))).collect();
    embed_blocks(ring, &parts)
}

impl Add for &ToeplitzElement {
    type Output = ToeplitzElement;
    fn add(self, rhs: &ToeplitzElement) -> ToeplitzElement {
        self.checked_add(rhs).expect("ring mismatch in element sum")
    }
}

impl Sub for &ToeplitzElement {
    type Output = ToeplitzElement;
    fn sub(self, rhs: &ToeplitzElement) -> ToeplitzElement {
        self.checked_sub(rhs).expect("ring mismatch in element difference")
    }
}

impl Mul for &ToeplitzElement {
    type Output = ToeplitzElement;
    fn mul(self, rhs: &ToeplitzElement) -> ToeplitzElement {
        self.checked_mul(rhs).expect("ring mismatch in element product")
    }
}

impl Neg for &ToeplitzElement {
    type Output = ToeplitzElement;
    fn neg(self) -> ToeplitzElement {
        self.scale(-one())
    }
}

pub fn elem_mul(a: &ToeplitzElement, b: &ToeplitzElement) -> Result<ToeplitzElement, AlgebraError> {
    a.checked_mul(b)
}

pub fn elem_adjoint(a: &ToeplitzElement) -> ToeplitzElement {
    a.adjoint()
}

/// Element of `K(F) = Z^k`: one integer per ring block.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KClass(pub Vec<i64>);

impl KClass {
    pub fn zero(k: usize) -> Self {
        Self(vec![0; k])
    }

    pub fn values(&self) -> &[i64] {
        &self.0
    }
}

impl Add for &KClass {
    type Output = KClass;
    fn add(self, rhs: &KClass) -> KClass {
        assert_eq!(self.0.len(), rhs.0.len());
        KClass(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &KClass {
    type Output = KClass;
    fn sub(self, rhs: &KClass) -> KClass {
        assert_eq!(self.0.len(), rhs.0.len());
        KClass(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &KClass {
    type Output = KClass;
    fn neg(self) -> KClass {
        KClass(self.0.iter().map(|a| -a).collect())
    }
}

impl fmt::Display for KClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// Finite projection `f`, or the cofinite projection `1 - f`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    ring: BaseRing,
    finite: ComplexMatrix,
    cofinite: bool,
}

/// Largest of `||m - m*||` and `||m^2 - m||`, entrywise.
fn projection_defect(m: &ComplexMatrix) -> f64 {
    let herm = (m - &m.adjoint()).max_abs();
    let idem = (&(m * m) - m).max_abs();
    herm.max(idem)
}

impl Projection {
    fn build(ring: BaseRing, m: ComplexMatrix, cofinite: bool) -> Result<Self, AlgebraError> {
        let d = ring.dim();
        if !m.is_square() || !m.rows().is_multiple_of(d) {
            return Err(AlgebraError::Shape(format!(
                "projection matrix is {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        if !ring.respects_blocks(&m, PROJECTION_TOL) {
            return Err(AlgebraError::Shape("projection mixes ring blocks".into()));
        }
        let mut m = m.hermitian_part();
        ring.mask_blocks(&mut m);
        m.chop(TRIM);
        let n = m.occupied_extent().div_ceil(d) * d;
        let m = m.resized(n, n);
        let defect = projection_defect(&m);
        if defect > PROJECTION_TOL {
            return Err(AlgebraError::NotProjection(defect));
        }
        Ok(Self {
            ring,
            finite: m,
            cofinite,
        })
    }

    /// Finite projection with matrix `m` on the first `m.rows() / d` coordinates.
    pub fn finite(ring: BaseRing, m: ComplexMatrix) -> Result<Self, AlgebraError> {
        Self::build(ring, m, false)
    }

    /// Cofinite projection `1 - m`.
    pub fn cofinite(ring: BaseRing, m: ComplexMatrix) -> Result<Self, AlgebraError> {
        Self::build(ring, m, true)
    }

    pub fn zero(ring: BaseRing) -> Self {
        Self {
            ring,
            finite: ComplexMatrix::zeros(0, 0),
            cofinite: false,
        }
    }

    pub fn one(ring: BaseRing) -> Self {
        Self::zero(ring).complement()
    }

    /// Coordinate projection `P_n`.
    pub fn unit(ring: BaseRing, n: usize) -> Self {
        let d = ring.dim();
        Self::coordinates(ring, &vec![n; d])
    }

    /// Diagonal projection keeping the first `counts[alpha]` coordinates of
    /// component `alpha`.
    pub fn coordinates(ring: BaseRing, counts: &[usize]) -> Self {
        let d = ring.dim();
        assert_eq!(counts.len(), d, "one count per component");
        let n = counts.iter().copied().max().unwrap_or(0);
        let mut m = ComplexMatrix::zeros(n * d, n * d);
        for (alpha, &c) in counts.iter().enumerate() {
            for i in 0..c {
                m[(i * d + alpha, i * d + alpha)] = one();
            }
        }
        let ext = m.occupied_extent().div_ceil(d) * d;
        Self {
            ring,
            finite: m.resized(ext, ext),
            cofinite: false,
        }
    }

    /// Orthogonal projection onto the column span of `basis` (rows in scalar
    /// coordinates, a multiple of `d`).
    pub fn onto_range(ring: BaseRing, basis: &ComplexMatrix) -> Result<Self, AlgebraError> {
        let m = numkit::range_projection(basis, PROJECTION_TOL);
        Self::finite(ring, m)
    }

    /// Normalizes an element with symbol 0 or 1 into a projection.
    pub fn from_element(a: &ToeplitzElement) -> Result<Self, AlgebraError> {
        let ring = a.ring().clone();
        let sym = a.symbol();
        if sym.is_zero() {
            return Self::finite(ring, a.correction().clone());
        }
        let one_sym = LaurentPoly::identity(ring.clone());
        let defect = sym.sub(&one_sym)?.sup_norm_upper();
        if defect > PROJECTION_TOL {
            return Err(AlgebraError::NotProjection(defect));
        }
        Self::cofinite(ring, a.correction().scale(-one()))
    }

    pub fn ring(&self) -> &BaseRing {
        &self.ring
    }

    pub fn is_finite(&self) -> bool {
        !self.cofinite
    }

    /// The finite matrix `f` (the projection is `f` or `1 - f`).
    pub fn finite_part(&self) -> &ComplexMatrix {
        &self.finite
    }

    /// Module coordinates spanned by the finite part.
    pub fn support(&self) -> usize {
        self.finite.rows() / self.ring.dim()
    }

    pub fn complement(&self) -> Self {
        Self {
            ring: self.ring.clone(),
            finite: self.finite.clone(),
            cofinite: !self.cofinite,
        }
    }

    pub fn element(&self) -> ToeplitzElement {
        if self.cofinite {
            ToeplitzElement::from_parts(LaurentPoly::identity(self.ring.clone()), self.finite.scale(-one()))
        } else {
            ToeplitzElement::from_parts(LaurentPoly::zero(self.ring.clone()), self.finite.clone())
        }
    }

    /// Restriction to ring block `i`, over `BaseRing::single(n_i)`.
    pub fn block_part(&self, i: usize) -> Self {
        let n = self.ring.block_sizes()[i];
        let mut m = extract_block(&self.ring, &self.finite, i);
        m.chop(TRIM);
        let k = m.occupied_extent().div_ceil(n) * n;
        Self {
            ring: BaseRing::single(n),
            finite: m.resized(k, k),
            cofinite: self.cofinite,
        }
    }

    /// Direct sum of one single-block projection per ring block; `None`
    /// when finite and cofinite parts are mixed.
    pub fn direct_sum(ring: &BaseRing, parts: &[Self]) -> Option<Self> {
        let cofinite = parts.first()?.cofinite;
        if parts.iter().any(|p| p.cofinite != cofinite) {
            return None;
        }
        let mats: Vec<ComplexMatrix> = parts.iter().map(|p| p.finite.clone()).collect();
        let m = embed_blocks(ring, &mats);
        let d = ring.dim();
        let k = m.occupied_extent().div_ceil(d) * d;
        Some(Self {
            ring: ring.clone(),
            finite: m.resized(k, k),
            cofinite,
        })
    }

    /// Top-left `(L d) x (L d)` corner of the projection.
    pub fn window(&self, l: usize) -> ComplexMatrix {
        let d = self.ring.dim();
        let f = self.finite.resized(l * d, l * d);
        if self.cofinite {
            &ComplexMatrix::identity(l * d) - &f
        } else {
            f
        }
    }

    /// Trace of the finite part, rounded.
    pub fn rank(&self) -> usize {
        self.finite.trace().re.round().max(0.0) as usize
    }

    /// `||p - q||`; projections of different kinds are at distance 1.
    pub fn distance(&self, other: &Self) -> f64 {
        if self.cofinite != other.cofinite {
            return 1.0;
        }
        let n = self.finite.rows().max(other.finite.rows());
        block_spectral_norm(&self.ring, &(&self.finite.resized(n, n) - &other.finite.resized(n, n)))
    }

    /// `self <= other` within `tol`, i.e. `other * self = self`.
    pub fn is_below(&self, other: &Self, tol: f64) -> bool {
        let diff = &(&other.element() * &self.element()) - &self.element();
        diff.norm_upper() <= tol
    }

    /// `||self * other||`, exact for finite parts.
    pub fn overlap(&self, other: &Self) -> f64 {
        (&self.element() * &other.element()).norm_upper()
    }

    /// Sum of two orthogonal finite projections, re-validated.
    pub fn orthogonal_sum(&self, other: &Self) -> Result<Self, AlgebraError> {
        if self.cofinite || other.cofinite {
            return Err(AlgebraError::NotFinite);
        }
        let n = self.finite.rows().max(other.finite.rows());
        let mut m = self.finite.resized(n, n);
        m.add_block(0, 0, &other.finite, one());
        Self::finite(self.ring.clone(), m)
    }

    /// `self - other` for finite `other <= self`.
    pub fn difference(&self, other: &Self) -> Result<Self, AlgebraError> {
        if self.cofinite || other.cofinite {
            return Err(AlgebraError::NotFinite);
        }
        let n = self.finite.rows().max(other.finite.rows());
        let mut m = self.finite.resized(n, n);
        m.add_block(0, 0, &other.finite, -one());
        Self::finite(self.ring.clone(), m)
    }
}

/// `[p]` in `K(F)`: per ring block, the rank of the block's part of `p`.
pub fn projection_class(p: &Projection) -> Result<KClass, AlgebraError> {
    if !p.is_finite() {
        return Err(AlgebraError::NotFinite);
    }
    let defect = projection_defect(p.finite_part());
    if defect > PROJECTION_TOL {
        return Err(AlgebraError::NotProjection(defect));
    }
    let ring = p.ring();
    let d = ring.dim();
    let n = p.support();
    let mut out = Vec::with_capacity(ring.num_blocks());
    for b in 0..ring.num_blocks() {
        let off = ring.offset(b);
        let size = ring.block_sizes()[b];
        let idx: Vec<usize> = (0..n).flat_map(|i| (0..size).map(move |a| i * d + off + a)).collect();
        if idx.is_empty() {
            out.push(0);
            continue;
        }
        let block = p.finite_part().select(&idx, &idx);
        out.push(numkit::rank(&block, PROJECTION_TOL) as i64);
    }
    Ok(KClass(out))
}

/// Finite-type ideal of the model: symbol-zero elements, with the coordinate
/// projections as approximate unit.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteTypeIdeal {
    ring: BaseRing,
}

impl FiniteTypeIdeal {
    pub fn new(ring: BaseRing) -> Self {
        Self { ring }
    }

    pub fn contains(&self, a: &ToeplitzElement) -> bool {
        a.ring() == &self.ring && a.is_finite()
    }

    pub fn unit(&self, n: usize) -> Projection {
        Projection::unit(self.ring.clone(), n)
    }

    /// Smallest `n` with `a (1 - P_n) = 0` and `(1 - P_n) a = 0`.
    pub fn support_bound(&self, a: &ToeplitzElement) -> Option<usize> {
        self.contains(a).then(|| a.support())
    }
}

/// `v = q T_{z^-k}` with `k` the support of `p`: `v v* = q` and `v* v` is `q`
/// shifted past `p`.
pub fn mvn_witness(p: &Projection, q: &Projection) -> Result<ToeplitzElement, AlgebraError> {
    if !p.is_finite() || !q.is_finite() {
        return Err(AlgebraError::NotFinite);
    }
    if p.ring() != q.ring() {
        return Err(AlgebraError::RingMismatch(p.ring().clone(), q.ring().clone()));
    }
    let k = p.support() as i64;
    let shift = ToeplitzElement::shift(q.ring().clone(), -k);
    elem_mul(&q.element(), &shift)
}

#[derive(Debug, Clone)]
pub struct Absorption {
    pub n: usize,
    pub p_prime: Projection,
    pub unitary: ToeplitzElement,
    pub delta: f64,
    pub distance: f64,
}

/// Largest `delta` with `delta (2 - delta) / (1 - delta) <= eps`.
pub fn absorb_delta(eps: f64) -> f64 {
    ((2.0 + eps) - ((2.0 + eps) * (2.0 + eps) - 4.0 * eps).sqrt()) / 2.0
}

/// Moves a finite projection under a coordinate projection: finds `n` with
/// `||p - P_n p|| <= delta`, takes `p'` the range projection of `P_n p`, and a
/// unitary `u` with `u* p u = p'`.
pub fn absorb_into_unit(p: &Projection, eps: f64) -> Result<Absorption, AlgebraError> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(AlgebraError::EpsilonTooLarge(eps));
    }
    if !p.is_finite() {
        return Err(AlgebraError::NotFinite);
    }
    let ring = p.ring().clone();
    let delta = absorb_delta(eps);
    let sz = p.support();
    let pm = p.finite_part();
    let mut chosen = sz;
    for n in 0..=sz {
        let pn = Projection::unit(ring.clone(), n).window(sz);
        let tail = pm - &(&pn * pm);
        if numkit::spectral_norm(&tail) <= delta {
            chosen = n;
            break;
        }
    }
    let pn = Projection::unit(ring.clone(), chosen).window(sz);
    let compressed = &pn * pm;
    let p_prime = Projection::onto_range(ring.clone(), &compressed)?;
    let (u, _) = fredholm::conjugate_projections_matrix(&p.window(sz.max(1)), &p_prime.window(sz.max(1)))
        .map_err(|e| AlgebraError::Shape(e.to_string()))?;
    let mut corr = u;
    let id = ComplexMatrix::identity(corr.rows());
    corr = &corr - &id;
    let unitary = ToeplitzElement::new(LaurentPoly::identity(ring), corr)?;
    let distance = p.distance(&p_prime);
    Ok(Absorption {
        n: chosen,
        p_prime,
        unitary,
        delta,
        distance,
    })
}
