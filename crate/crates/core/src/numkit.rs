//! Dense complex matrix kernel.
//!
//! Every construction in the operator model eventually reduces to finite
//! matrices: truncations, finite corrections, the column blocks fed to polar
//! decompositions. [`ComplexMatrix`] is a plain row-major container with the
//! handful of products the engine needs; singular value and Hermitian eigen
//! decompositions are delegated to `faer`.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, MatRef, Side};
use num_complex::Complex64;
use thiserror::Error;

/// Double precision complex scalar used throughout the crate.
pub type C64 = Complex64;

/// Products above this many multiply-adds go through the blocked kernel.
const DENSE_PRODUCT_WORK: usize = 48 * 48 * 48;

/// Default relative threshold for numerical rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumError {
    #[error("matrix is not positive semidefinite (eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is numerically singular")]
    Singular,
    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
}

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self, NumError> {
        if data.len() != rows * cols {
            return Err(NumError::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [C64] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j].conj();
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.re.is_finite() && x.im.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.re == 0.0 && x.im == 0.0)
    }

    /// Copy of the block `rows r0..r0+nr`, `cols c0..c0+nc`; entries outside
    /// `self` read as zero.
    pub fn submatrix(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        Self::from_fn(nr, nc, |i, j| self.get_or_zero(r0 + i, c0 + j))
    }

    /// Top-left `rows x cols` corner, zero padded if `self` is smaller.
    pub fn resized(&self, rows: usize, cols: usize) -> Self {
        if rows == self.rows && cols == self.cols {
            return self.clone();
        }
        self.submatrix(0, 0, rows, cols)
    }

    pub fn get_or_zero(&self, i: usize, j: usize) -> C64 {
        if i < self.rows && j < self.cols {
            self.data[i * self.cols + j]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    /// Matrix restricted to the given row and column index sets.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }

    /// Adds `other * s` into the block starting at `(r0, c0)`.
    pub fn add_block(&mut self, r0: usize, c0: usize, other: &ComplexMatrix, s: C64) {
        for i in 0..other.rows {
            let dst = (r0 + i) * self.cols + c0;
            let src = i * other.cols;
            for j in 0..other.cols {
                self.data[dst + j] += other.data[src + j] * s;
            }
        }
    }

    pub fn matmul(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix, NumError> {
        if self.cols != rhs.rows {
            return Err(NumError::Dimension(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        if self.rows * self.cols * rhs.cols > DENSE_PRODUCT_WORK {
            let prod = &self.to_faer() * &rhs.to_faer();
            return Ok(ComplexMatrix::from_faer(prod.as_ref()));
        }
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let rrow = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &r) in orow.iter_mut().zip(rrow) {
                    *o += a * r;
                }
            }
        }
        Ok(out)
    }

    /// Zeroes entries with magnitude at or below `threshold`.
    pub fn chop(&mut self, threshold: f64) {
        for x in &mut self.data {
            if x.norm() <= threshold {
                *x = C64::new(0.0, 0.0);
            }
        }
    }

    /// One past the largest row or column index holding a nonzero entry.
    pub fn occupied_extent(&self) -> usize {
        let mut extent = 0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let x = self.data[i * self.cols + j];
                if x.re != 0.0 || x.im != 0.0 {
                    extent = extent.max(i + 1).max(j + 1);
                }
            }
        }
        extent
    }

    pub fn hermitian_part(&self) -> ComplexMatrix {
        let adj = self.adjoint();
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&adj.data).map(|(a, b)| (a + b) * 0.5).collect(),
        }
    }

    pub fn to_faer(&self) -> Mat<C64> {
        Mat::from_fn(self.rows, self.cols, |i, j| self.data[i * self.cols + j])
    }

    pub fn from_faer(m: MatRef<'_, C64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(12) {
            write!(f, "  ")?;
            for j in 0..self.cols.min(12) {
                let x = self[(i, j)];
                write!(f, "{:>9.4}{:+.4}i ", x.re, x.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

fn zip_same_shape(a: &ComplexMatrix, b: &ComplexMatrix, f: impl Fn(C64, C64) -> C64) -> ComplexMatrix {
    assert!(
        a.rows == b.rows && a.cols == b.cols,
        "shape mismatch {}x{} vs {}x{}",
        a.rows,
        a.cols,
        b.rows,
        b.cols
    );
    ComplexMatrix {
        rows: a.rows,
        cols: a.cols,
        data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        zip_same_shape(self, rhs, |x, y| x + y)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        zip_same_shape(self, rhs, |x, y| x - y)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale_real(-1.0)
    }
}

/// Panics on dimension mismatch; use [`ComplexMatrix::matmul`] for a checked product.
impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("matrix product dimension mismatch")
    }
}

/// Thin singular value decomposition `M = U diag(s) V*`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: ComplexMatrix,
    pub singular_values: Vec<f64>,
    pub v: ComplexMatrix,
}

/// Decomposition that signals failure; callers treat it as unbounded.
fn failed_svd(rows: usize, cols: usize) -> Svd {
    Svd {
        u: ComplexMatrix::zeros(rows, 1),
        singular_values: vec![f64::INFINITY],
        v: ComplexMatrix::zeros(cols, 1),
    }
}

/// Singular value decomposition with singular values sorted descending.
pub fn svd(m: &ComplexMatrix) -> Svd {
    if m.rows == 0 || m.cols == 0 {
        return Svd {
            u: ComplexMatrix::zeros(m.rows, 0),
            singular_values: Vec::new(),
            v: ComplexMatrix::zeros(m.cols, 0),
        };
    }
    if !m.is_finite() {
        return failed_svd(m.rows, m.cols);
    }
    let Ok(dec) = m.to_faer().thin_svd() else {
        return failed_svd(m.rows, m.cols);
    };
    let s = dec.S().column_vector();
    Svd {
        u: ComplexMatrix::from_faer(dec.U()),
        singular_values: (0..s.nrows()).map(|k| s[k].re).collect(),
        v: ComplexMatrix::from_faer(dec.V()),
    }
}

pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    if m.rows == 0 || m.cols == 0 {
        return Vec::new();
    }
    if !m.is_finite() {
        return vec![f64::INFINITY];
    }
    m.to_faer().singular_values().unwrap_or_else(|_| vec![f64::INFINITY])
}

/// Largest singular value.
pub fn spectral_norm(m: &ComplexMatrix) -> f64 {
    if m.is_zero() {
        return 0.0;
    }
    // Work on the occupied corner only; corrections are often zero padded.
    let ext = m.occupied_extent();
    let core = if ext < m.rows.max(m.cols) {
        m.submatrix(0, 0, ext.min(m.rows), ext.min(m.cols))
    } else {
        m.clone()
    };
    singular_values(&core).first().copied().unwrap_or(0.0)
}

/// Numerical rank: singular values above `tol * ||M||`.
pub fn rank(m: &ComplexMatrix, tol: f64) -> usize {
    let s = singular_values(m);
    let Some(&top) = s.first() else { return 0 };
    if top == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > tol * top).count()
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    /// `sum_i g(lambda_i) v_i v_i*`.
    pub fn apply_fn(&self, mut g: impl FnMut(f64) -> f64) -> ComplexMatrix {
        let n = self.vectors.rows();
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            let w = g(lam);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let vi = self.vectors[(i, k)] * w;
                if vi.re == 0.0 && vi.im == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += vi * self.vectors[(j, k)].conj();
                }
            }
        }
        out
    }
}

/// Eigendecomposition of the Hermitian part of `m`.
pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<HermitianEigen, NumError> {
    if !m.is_square() {
        return Err(NumError::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    if m.rows == 0 {
        return Ok(HermitianEigen {
            values: Vec::new(),
            vectors: ComplexMatrix::zeros(0, 0),
        });
    }
    let dec = m
        .hermitian_part()
        .to_faer()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| NumError::NoConvergence)?;
    let s = dec.S().column_vector();
    Ok(HermitianEigen {
        values: (0..s.nrows()).map(|k| s[k].re).collect(),
        vectors: ComplexMatrix::from_faer(dec.U()),
    })
}

/// Eigenvalues of a general square complex matrix (complex Schur form).
pub fn eigenvalues(m: &ComplexMatrix) -> Result<Vec<C64>, NumError> {
    if !m.is_square() {
        return Err(NumError::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    if m.rows == 0 {
        return Ok(Vec::new());
    }
    m.to_faer().eigenvalues().map_err(|_| NumError::NoConvergence)
}

/// Inverse of a square matrix via LU with partial pivoting.
pub fn inverse(m: &ComplexMatrix) -> Result<ComplexMatrix, NumError> {
    if !m.is_square() {
        return Err(NumError::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    let inv = ComplexMatrix::from_faer(m.to_faer().partial_piv_lu().inverse().as_ref());
    if !inv.is_finite() {
        return Err(NumError::Singular);
    }
    Ok(inv)
}

/// Polar factors `M = V P` with `V` a partial isometry and `P = |M|`.
#[derive(Debug, Clone)]
pub struct Polar {
    pub isometry: ComplexMatrix,
    pub positive: ComplexMatrix,
    /// Number of singular values kept (rank of `M` at the threshold).
    pub rank: usize,
}

/// Polar decomposition through the SVD. Singular values at or below
/// `tol * ||M||` are treated as zero, so `V*V` is the support projection of
/// `P` and `V V*` the range projection of `M`.
pub fn polar_decompose(m: &ComplexMatrix, tol: f64) -> Polar {
    let dec = svd(m);
    let keep = kept_count(&dec.singular_values, tol);
    let u = dec.u.submatrix(0, 0, m.rows, keep);
    let v = dec.v.submatrix(0, 0, m.cols, keep);
    let mut vs = v.clone();
    for k in 0..keep {
        let s = dec.singular_values[k];
        for i in 0..m.cols {
            vs[(i, k)] *= s;
        }
    }
    let v_adj = v.adjoint();
    Polar {
        isometry: &u * &v_adj,
        positive: &vs * &v_adj,
        rank: keep,
    }
}

/// Number of leading singular values above `tol` times the largest.
fn kept_count(values: &[f64], tol: f64) -> usize {
    let top = values.first().copied().unwrap_or(0.0);
    if top == 0.0 || !top.is_finite() {
        return 0;
    }
    values.iter().take_while(|&&s| s > tol * top).count()
}

/// Moore-Penrose pseudo-inverse, dropping singular values at or below
/// `tol` times the largest.
pub fn pseudo_inverse(m: &ComplexMatrix, tol: f64) -> ComplexMatrix {
    let dec = svd(m);
    let keep = kept_count(&dec.singular_values, tol);
    let mut v = dec.v.submatrix(0, 0, m.cols, keep);
    for k in 0..keep {
        let s = dec.singular_values[k];
        for i in 0..m.cols {
            v[(i, k)] /= s;
        }
    }
    &v * &dec.u.submatrix(0, 0, m.rows, keep).adjoint()
}

/// Moore-Penrose style inverse square root of a PSD matrix: `N M N` is the
/// support projection of `M`, and `N` vanishes on the kernel.
pub fn psd_inv_sqrt(m: &ComplexMatrix, tol: f64) -> Result<ComplexMatrix, NumError> {
    let eig = hermitian_eigen(m)?;
    let top = eig.values.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()));
    if let Some(&low) = eig.values.first() {
        if low < -tol * top.max(1.0) {
            return Err(NumError::NotPsd(low));
        }
    }
    let cut = tol * top;
    Ok(eig.apply_fn(|lam| if lam > cut && lam > 0.0 { 1.0 / lam.sqrt() } else { 0.0 }))
}

/// Orthogonal projection onto the span of the columns of `basis`.
pub fn range_projection(basis: &ComplexMatrix, tol: f64) -> ComplexMatrix {
    let dec = svd(basis);
    let keep = kept_count(&dec.singular_values, tol);
    let u = dec.u.submatrix(0, 0, basis.rows(), keep);
    &u * &u.adjoint()
}

/// Orthonormal basis (columns) of the numerical null space of `m`.
pub fn null_space(m: &ComplexMatrix, tol: f64) -> ComplexMatrix {
    let n = m.cols();
    if n == 0 {
        return ComplexMatrix::zeros(0, 0);
    }
    // Pad to at least n rows so the SVD returns a full right basis.
    let padded = if m.rows() < n { m.resized(n, n) } else { m.clone() };
    let dec = svd(&padded);
    let top = dec.singular_values.first().copied().unwrap_or(0.0);
    let null: Vec<usize> = (0..dec.singular_values.len())
        .filter(|&k| top == 0.0 || dec.singular_values[k] <= tol * top)
        .collect();
    ComplexMatrix::from_fn(n, null.len(), |i, j| dec.v[(i, null[j])])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn random_projection(rng: &mut ChaCha8Rng, n: usize, k: usize) -> ComplexMatrix {
        range_projection(&random_matrix(rng, n, k), 1e-12)
    }

    #[test]
    fn adjoint_is_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_matrix(&mut rng, 3, 5);
        assert_eq!(m.adjoint().adjoint(), m);
    }

    #[test]
    fn from_row_major_checks_length() {
        assert!(ComplexMatrix::from_row_major(2, 2, vec![c(1.0, 0.0); 3]).is_err());
    }

    #[test]
    fn spectral_norm_examples() {
        assert_eq!(spectral_norm(&ComplexMatrix::zeros(3, 3)), 0.0);
        let d = ComplexMatrix::from_real_diagonal(&[3.0, -1.0]);
        assert!((spectral_norm(&d) - 3.0).abs() < 1e-12);
        // All-ones 2x2 = (1,1)^T (1,1): singular values {2, 0}.
        let ones = ComplexMatrix::from_fn(2, 2, |_, _| c(1.0, 0.0));
        assert!((spectral_norm(&ones) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn polar_of_identity_and_diagonal() {
        let id = ComplexMatrix::identity(2);
        let p = polar_decompose(&id, 1e-10);
        assert!((&p.isometry - &id).max_abs() < 1e-14);
        assert!((&p.positive - &id).max_abs() < 1e-14);

        let d = ComplexMatrix::from_real_diagonal(&[2.0, 0.0]);
        let p = polar_decompose(&d, 1e-10);
        assert!((&p.isometry - &ComplexMatrix::from_real_diagonal(&[1.0, 0.0])).max_abs() < 1e-14);
        assert!((&p.positive - &d).max_abs() < 1e-14);
        assert_eq!(p.rank, 1);
    }

    #[test]
    fn polar_of_zero_is_zero() {
        let z = ComplexMatrix::zeros(3, 2);
        let p = polar_decompose(&z, 1e-10);
        assert!(p.isometry.is_zero() && p.positive.is_zero());
    }

    #[test]
    fn polar_rank_two_isometry_has_unit_singular_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = &random_matrix(&mut rng, 3, 2) * &random_matrix(&mut rng, 2, 3);
        let p = polar_decompose(&m, 1e-10);
        // Oracle: the SVD of M itself says rank 2.
        let s_m = singular_values(&m);
        assert!(s_m[2] < 1e-12 * s_m[0]);
        let s_v = singular_values(&p.isometry);
        assert!(s_v[..2].iter().all(|s| (s - 1.0).abs() < 1e-9));
        assert!(s_v[2] < 1e-9);
        assert!((&m - &(&p.isometry * &p.positive)).max_abs() < 1e-12);
        // V*V is the support projection of P.
        let vv = &p.isometry.adjoint() * &p.isometry;
        let support = range_projection(&p.positive, 1e-10);
        assert!((&vv - &support).max_abs() < 1e-10);
    }

    #[test]
    fn psd_inv_sqrt_examples() {
        let id = ComplexMatrix::identity(3);
        assert!((&psd_inv_sqrt(&id, 1e-12).unwrap() - &id).max_abs() < 1e-14);
        let d = ComplexMatrix::from_real_diagonal(&[4.0, 0.0]);
        let n = psd_inv_sqrt(&d, 1e-12).unwrap();
        assert!((&n - &ComplexMatrix::from_real_diagonal(&[0.5, 0.0])).max_abs() < 1e-14);
        let neg = ComplexMatrix::from_real_diagonal(&[1.0, -0.5]);
        assert!(matches!(psd_inv_sqrt(&neg, 1e-12), Err(NumError::NotPsd(_))));
    }

    #[test]
    fn psd_inv_sqrt_random_gives_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_matrix(&mut rng, 4, 3);
        let m = &x * &x.adjoint(); // rank 3 PSD
        let n = psd_inv_sqrt(&m, 1e-10).unwrap();
        let e = &(&n * &m) * &n;
        assert!((&(&e * &e) - &e).max_abs() < 1e-9);
        // Oracle: eigendecomposition support projection.
        let eig = hermitian_eigen(&m).unwrap();
        let support = eig.apply_fn(|l| if l > 1e-9 { 1.0 } else { 0.0 });
        assert!((&e - &support).max_abs() < 1e-9);
    }

    #[test]
    fn eigenvalues_of_companion() {
        // z^2 - 0.25 -> roots +-0.5
        let mut comp = ComplexMatrix::zeros(2, 2);
        comp[(0, 1)] = c(0.25, 0.0);
        comp[(1, 0)] = c(1.0, 0.0);
        let mut ev = eigenvalues(&comp).unwrap();
        ev.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((ev[0] - c(-0.5, 0.0)).norm() < 1e-12);
        assert!((ev[1] - c(0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let m = ComplexMatrix::from_fn(1, 3, |_, j| c(j as f64, 0.0));
        let ns = null_space(&m, 1e-12);
        assert_eq!(ns.cols(), 2);
        assert!((&m * &ns).max_abs() < 1e-12);
    }

    #[test]
    fn principal_angle_bound_on_pq() {
        // ||PQ|| is the largest cosine of the principal angles between the
        // ranges: max |<xi, eta>| over unit xi in ran P, eta in ran Q.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let n = rng.gen_range(2..=12);
            let kp = rng.gen_range(1..=n);
            let kq = rng.gen_range(1..=n);
            let basis_p = random_matrix(&mut rng, n, kp);
            let basis_q = random_matrix(&mut rng, n, kq);
            let p = range_projection(&basis_p, 1e-12);
            let q = range_projection(&basis_q, 1e-12);
            // Independent route: orthonormal bases and the SVD of U_p* U_q.
            let up = svd(&basis_p).u;
            let uq = svd(&basis_q).u;
            let cosines = singular_values(&(&up.adjoint() * &uq));
            let c_max = cosines.first().copied().unwrap_or(0.0);
            assert!(spectral_norm(&(&p * &q)) <= c_max + 1e-10);
        }
    }

    #[test]
    fn adjoint_of_bijection_is_bijection() {
        // M maps K onto L and vanishes on the complement of K; then M* maps L
        // onto K and vanishes on the complement of L.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let n = rng.gen_range(3..=10);
            let k = rng.gen_range(1..n);
            let pk = random_projection(&mut rng, n, k);
            let m = &random_matrix(&mut rng, n, n) * &pk;
            let pl = range_projection(&m, 1e-10);
            let rank_m = rank(&m, 1e-10);
            assert_eq!(rank_m, k);
            let ms = m.adjoint();
            assert_eq!(rank(&(&ms * &pl), 1e-10), rank_m);
            let comp = &ComplexMatrix::identity(n) - &pl;
            assert!((&ms * &comp).max_abs() < 1e-10);
        }
    }

    #[test]
    fn polar_round_trip_many() {
        let mut rng = ChaCha8Rng::seed_from_u64(1000);
        let tol = 1e-10;
        for _ in 0..1000 {
            let r = rng.gen_range(1..=6);
            let c_ = rng.gen_range(1..=6);
            let m = random_matrix(&mut rng, r, c_);
            let p = polar_decompose(&m, tol);
            let err = spectral_norm(&(&m - &(&p.isometry * &p.positive)));
            assert!(err <= 10.0 * tol * (1.0 + spectral_norm(&m)), "err {err}");
        }
    }
}
