//! Almost-invertibility certificates and the index.
//!
//! An element `a` is invertible up to a pair of projections `(p, q)` when the
//! corner `a' = (1-q) a (1-p)` has an inverse `b = (1-p) b (1-q)` inside the
//! corner. Floating point never gives `a'b = 1-q` exactly, so a certificate
//! stores certified upper bounds for both residuals; bounds below one make the
//! corner invertible by a Neumann series. The index of `a` is `[p] - [q]`.

use std::f64::consts::SQRT_2;

use thiserror::Error;

use crate::algebra::{
    block_spectral_norm, map_blocks, projection_class, AlgebraError, KClass, Projection, ToeplitzElement,
    PROJECTION_TOL,
};
use crate::laurent::{self, BaseRing, LaurentError, LaurentPoly, DEFAULT_MARGIN};
use crate::numkit::{self, ComplexMatrix, NumError, C64};

/// Neumann and refinement loops stop after this many steps.
pub const MAX_TERMS: usize = 60;
/// Default refinement target for residual bounds.
pub const DEFAULT_TOL: f64 = 1e-9;

/// `C` in `||I - U|| <= C ||P - Q||`, from summing `(1 - t)^(-1/2)` at `t = 1/2`.
pub fn conjugation_constant() -> f64 {
    4.0 * SQRT_2 - 2.0
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FredholmError {
    #[error("not an inverse: residual bounds {res_left:e} / {res_right:e}")]
    NotAnInverse { res_left: f64, res_right: f64 },
    #[error("b violates the corner shape by {0:e}")]
    ShapeViolation(f64),
    #[error("perturbation too large: ||b|| ||c|| = {0}")]
    PerturbationTooLarge(f64),
    #[error("projections too far: {distance} >= {threshold}")]
    ProjectionsTooFar { distance: f64, threshold: f64 },
    #[error("projections too far apart: ||P - Q|| = {0}")]
    TooFarApart(f64),
    #[error("evidence of left invertibility fails (residual {0:e})")]
    NotLeftInvertible(f64),
    #[error("rank drop: expected {expected}, found {found}")]
    RankDrop { expected: usize, found: usize },
    #[error("invalid decomposition: {0}")]
    DecompositionInvalid(String),
    #[error("smallness condition fails: {0} and {1} both reach 1/||b|| = {2}")]
    SmallnessFails(f64, f64, f64),
    #[error("defects are not finite type (symbol bound {0:e})")]
    NotModularInverse(f64),
    #[error("inverse seed failed (residual bound {0:e})")]
    SeedFailure(f64),
    #[error("not Fredholm: {0}")]
    NotFredholm(String),
    #[error("triangularity fails: ||q a (1-p)|| = {0:e}")]
    NotTriangular(f64),
    #[error("unit P_{0} does not dominate p")]
    UnitNotAbove(usize),
    #[error("corner system is singular")]
    CornerSingular,
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Laurent(#[from] LaurentError),
    #[error(transparent)]
    Num(#[from] NumError),
}

type Result<T> = std::result::Result<T, FredholmError>;

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

/// Witness that `a` is invertible up to `(p, q)`.
#[derive(Debug, Clone)]
pub struct AlmostInverseCertificate {
    pub p: Projection,
    pub q: Projection,
    pub b: ToeplitzElement,
    /// Bound on `||a'b - (1-q)||`.
    pub res_left: f64,
    /// Bound on `||b a' - (1-p)||`.
    pub res_right: f64,
    pub b_norm_upper: f64,
}

impl AlmostInverseCertificate {
    /// `[p] - [q]`.
    pub fn class(&self) -> Result<KClass> {
        Ok(&projection_class(&self.p)? - &projection_class(&self.q)?)
    }

    pub fn max_residual(&self) -> f64 {
        self.res_left.max(self.res_right)
    }

    /// The same certificate read for `a*`: pair `(q, p)` and inverse `b*`.
    pub fn adjoint(&self) -> Self {
        Self {
            p: self.q.clone(),
            q: self.p.clone(),
            b: self.b.adjoint(),
            res_left: self.res_right,
            res_right: self.res_left,
            b_norm_upper: self.b_norm_upper,
        }
    }

    /// Restriction to ring block `i`; the bounds of the whole certificate
    /// bound those of each block.
    pub fn block_part(&self, i: usize) -> Self {
        Self {
            p: self.p.block_part(i),
            q: self.q.block_part(i),
            b: self.b.block_part(i),
            res_left: self.res_left,
            res_right: self.res_right,
            b_norm_upper: self.b_norm_upper,
        }
    }

    /// Direct sum of one certificate per ring block; `None` when a pair mixes
    /// finite and cofinite parts.
    pub fn direct_sum(ring: &BaseRing, parts: &[Self]) -> Option<Self> {
        let ps: Vec<Projection> = parts.iter().map(|c| c.p.clone()).collect();
        let qs: Vec<Projection> = parts.iter().map(|c| c.q.clone()).collect();
        let bs: Vec<ToeplitzElement> = parts.iter().map(|c| c.b.clone()).collect();
        let fold = |f: fn(&Self) -> f64| parts.iter().map(f).fold(0.0, f64::max);
        Some(Self {
            p: Projection::direct_sum(ring, &ps)?,
            q: Projection::direct_sum(ring, &qs)?,
            b: ToeplitzElement::direct_sum(ring, &bs).ok()?,
            res_left: fold(|c| c.res_left),
            res_right: fold(|c| c.res_right),
            b_norm_upper: fold(|c| c.b_norm_upper),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineOptions {
    pub tol: f64,
    pub margin: f64,
    /// Truncation size for the lower norm estimate in diagnostics.
    pub trunc: usize,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            margin: DEFAULT_MARGIN,
            trunc: 64,
        }
    }
}

/// `(1 - q) a (1 - p)`.
pub fn corner(a: &ToeplitzElement, p: &Projection, q: &Projection) -> ToeplitzElement {
    let cq = q.complement().element();
    let cp = p.complement().element();
    &(&cq * a) * &cp
}

/// Certified norm bound used for residuals: the Frobenius norm of the
/// correction when that already settles the comparison with `cutoff`,
/// otherwise the spectral norm.
fn residual_bound(e: &ToeplitzElement, cutoff: f64) -> f64 {
    let sym = e.symbol().sup_norm_upper();
    let fro = e.correction().frobenius();
    if sym + fro <= cutoff {
        return sym + fro;
    }
    sym + block_spectral_norm(e.ring(), e.correction())
}

fn residuals(
    a_corner: &ToeplitzElement,
    p: &Projection,
    q: &Projection,
    b: &ToeplitzElement,
    cutoff: f64,
) -> (ToeplitzElement, f64, f64) {
    let left = &(a_corner * b) - &q.complement().element();
    let right = &(b * a_corner) - &p.complement().element();
    let rl = residual_bound(&left, cutoff);
    let rr = residual_bound(&right, cutoff);
    (left, rl, rr)
}

/// Checks residual bounds without refining `b`.
pub fn certify(
    a: &ToeplitzElement,
    p: &Projection,
    q: &Projection,
    b: &ToeplitzElement,
    tol: f64,
) -> Result<AlmostInverseCertificate> {
    verify_inner(a, p, q, b, tol, false)
}

/// Certificate for `a` up to `(p, q)` with candidate inverse `b`; refines `b`
/// by Newton steps `b <- b - b (a'b - (1-q))` while the residuals exceed `tol`.
pub fn verify_up_to(
    a: &ToeplitzElement,
    p: &Projection,
    q: &Projection,
    b: &ToeplitzElement,
    tol: f64,
) -> Result<AlmostInverseCertificate> {
    verify_inner(a, p, q, b, tol, true)
}

fn verify_inner(
    a: &ToeplitzElement,
    p: &Projection,
    q: &Projection,
    b: &ToeplitzElement,
    tol: f64,
    refine: bool,
) -> Result<AlmostInverseCertificate> {
    let cp = p.complement().element();
    let cq = q.complement().element();
    let shaped = &(&cp * b) * &cq;
    let shape_err = (b - &shaped).norm_upper();
    if shape_err > tol.max(PROJECTION_TOL) {
        return Err(FredholmError::ShapeViolation(shape_err));
    }
    let a_corner = &(&cq * a) * &cp;
    let mut b = shaped;
    let (mut left, mut rl, mut rr) = residuals(&a_corner, p, q, &b, tol);
    if rl >= 1.0 || rr >= 1.0 {
        return Err(FredholmError::NotAnInverse {
            res_left: rl,
            res_right: rr,
        });
    }
    if refine {
        let mut steps = 0;
        while rl.max(rr) > tol && steps < MAX_TERMS {
            steps += 1;
            let scale = b.norm_upper().max(1.0);
            let cand = (&b - &(&b * &left)).chop_symbol(1e-17 * scale);
            let cand = &(&cp * &cand) * &cq;
            let (l2, rl2, rr2) = residuals(&a_corner, p, q, &cand, tol);
            if rl2.max(rr2) >= 0.5 * rl.max(rr) {
                if rl2.max(rr2) < rl.max(rr) {
                    (b, rl, rr) = (cand, rl2, rr2);
                }
                break;
            }
            (b, left, rl, rr) = (cand, l2, rl2, rr2);
        }
    }
    let b_norm_upper = b.norm_upper();
    Ok(AlmostInverseCertificate {
        p: p.clone(),
        q: q.clone(),
        b,
        res_left: rl,
        res_right: rr,
        b_norm_upper,
    })
}

/// Inverse of the corner `(1-q) a (1-p)` built from a parametrix.
///
/// With `c = (1-p) g (1-q)` the product `a'c` equals `(1-q) + E + Phi` where
/// `E = (1-q) T_{h-1} (1-q)` carries the symbol defect and `Phi` is finite.
/// `(1-q) + Phi` is inverted exactly on a window, which gives `t`, and
/// `b = c t` leaves only `E t` as right residual.
pub fn corner_inverse(
    a: &ToeplitzElement,
    p: &Projection,
    q: &Projection,
    parametrix: &ToeplitzElement,
) -> Result<ToeplitzElement> {
    if !q.is_finite() {
        return Err(AlgebraError::NotFinite.into());
    }
    let ring = a.ring().clone();
    let d = ring.dim();
    let cp = p.complement().element();
    let cq = q.complement().element();
    let a_corner = &(&cq * a) * &cp;
    let c = &(&cp * parametrix) * &cq;
    let x = &a_corner * &c;
    let defect = ToeplitzElement::from_symbol(x.symbol().sub(&LaurentPoly::identity(ring.clone()))?);
    let e = &(&cq * &defect) * &cq;
    let phi = &(&x - &cq) - &e;
    let l = phi.support().max(q.support());
    let mut m = ComplexMatrix::identity(l * d);
    m.add_block(0, 0, phi.correction(), one());
    let inv = numkit::inverse(&m).map_err(|_| FredholmError::CornerSingular)?;
    let q_l = q.window(l);
    let t_corr = &(&inv - &q_l) - &ComplexMatrix::identity(l * d);
    let t = ToeplitzElement::new(LaurentPoly::identity(ring), t_corr)?;
    let b = &c * &t;
    Ok(&(&cp * &b) * &cq)
}

/// Small perturbation: certificate for `a + c` with the same pair and
/// `b_1 = sum_j (-b c')^j b`, `c' = (1-q) c (1-p)`.
pub fn perturb_inverse(
    cert: &AlmostInverseCertificate,
    a: &ToeplitzElement,
    c: &ToeplitzElement,
    tol: f64,
) -> Result<AlmostInverseCertificate> {
    let c_norm = c.norm_upper();
    let beta = cert.b_norm_upper * c_norm;
    if beta >= 1.0 {
        return Err(FredholmError::PerturbationTooLarge(beta));
    }
    let a_new = a + c;
    if c_norm == 0.0 {
        let mut out = cert.clone();
        out.b_norm_upper = cert.b_norm_upper;
        return Ok(out);
    }
    let cp = cert.p.complement().element();
    let cq = cert.q.complement().element();
    let c_corner = &(&cq * c) * &cp;
    let b = &cert.b;
    let terms = neumann_terms(beta, cert.b_norm_upper, tol);
    let b1 = if c_corner.is_finite() {
        // x = -b c' vanishes off P_N, so sum_j x^j = 1 + x sum_{j<K} y^j with
        // y the N x N window of x.
        let n = c_corner.support();
        let x = -&(b * &c_corner);
        let d = a.ring().dim();
        let y = x.window(0, 0, n, n);
        let mut acc = ComplexMatrix::identity(n * d);
        let mut pow = ComplexMatrix::identity(n * d);
        for _ in 1..terms {
            pow = &pow * &y;
            acc = &acc + &pow;
        }
        let s = ToeplitzElement::finite(a.ring().clone(), acc)?;
        let xs = &x * &s;
        b + &(&xs * b)
    } else {
        let x = -&(b * &c_corner);
        let chop = 1e-3 * tol / (terms as f64);
        let mut term = b.clone();
        let mut acc = b.clone();
        for _ in 0..terms {
            term = (&x * &term).chop_symbol(chop);
            acc = &acc + &term;
        }
        acc
    };
    let mut out = certify(&a_new, &cert.p, &cert.q, &b1, tol)?;
    let bound = cert.b_norm_upper / (1.0 - beta);
    out.b_norm_upper = out.b_norm_upper.min(bound);
    Ok(out)
}

/// Number of Neumann terms until the geometric tail `beta^(K+1)/(1-beta) ||b||`
/// drops below `tol`, capped.
fn neumann_terms(beta: f64, b_norm: f64, tol: f64) -> usize {
    if beta <= 0.0 {
        return 1;
    }
    let mut k = 1;
    let mut tail = beta * b_norm.max(1.0) / (1.0 - beta);
    while tail > 0.1 * tol && k < MAX_TERMS {
        tail *= beta;
        k += 1;
    }
    k
}

/// Result of [`conjugate_projections_matrix`].
#[derive(Debug, Clone)]
pub struct Conjugation {
    pub unitary: ComplexMatrix,
    /// `||P - Q||`.
    pub distance: f64,
    /// `||I - U||`.
    pub deviation: f64,
}

impl Conjugation {
    /// Whether `||I - U|| <= C ||P - Q||` (only claimed for distance < 1/2).
    pub fn within_bound(&self, slack: f64) -> bool {
        self.deviation <= conjugation_constant() * self.distance + slack
    }
}

/// Unitary `U = V + W` with `U* P U = Q`, where
/// `V = P (I + P(Q-P)P)^(-1/2) Q` and `W` is the same on complements.
pub fn conjugate_projections_matrix(p: &ComplexMatrix, q: &ComplexMatrix) -> Result<(ComplexMatrix, Conjugation)> {
    if p.rows() != q.rows() || !p.is_square() || !q.is_square() {
        return Err(NumError::Dimension(format!("{}x{} vs {}x{}", p.rows(), p.cols(), q.rows(), q.cols())).into());
    }
    let n = p.rows();
    let id = ComplexMatrix::identity(n);
    let distance = numkit::spectral_norm(&(p - q));
    if distance >= 1.0 - 1e-12 {
        return Err(FredholmError::TooFarApart(distance));
    }
    let half = |pp: &ComplexMatrix, qq: &ComplexMatrix| -> Result<ComplexMatrix> {
        let m = &id + &(&(pp * &(qq - pp)) * pp);
        let inv_sqrt = numkit::psd_inv_sqrt(&m, 1e-12)?;
        Ok(&(pp * &inv_sqrt) * qq)
    };
    let v = half(p, q)?;
    let w = half(&(&id - p), &(&id - q))?;
    let u = &v + &w;
    let deviation = numkit::spectral_norm(&(&id - &u));
    let info = Conjugation {
        unitary: u.clone(),
        distance,
        deviation,
    };
    Ok((u, info))
}

/// Element-level version: returns the unitary `u = 1 + (U - I)` on a window
/// covering both projections.
pub fn conjugate_projections(p: &Projection, q: &Projection) -> Result<(ToeplitzElement, Conjugation)> {
    if p.is_finite() != q.is_finite() {
        return Err(FredholmError::TooFarApart(1.0));
    }
    let l = p.support().max(q.support());
    let (mut u, info) = conjugate_projections_matrix(&p.window(l), &q.window(l))?;
    p.ring().mask_blocks(&mut u);
    let id = ComplexMatrix::identity(u.rows());
    let elem = ToeplitzElement::new(LaurentPoly::identity(p.ring().clone()), &u - &id)?;
    Ok((elem, info))
}

/// Certificate for `a` up to nearby `(p', q')`, following the unitary
/// conjugation argument: `u* q' u = q`, `w* p' w = p`, two perturbation steps,
/// and `b' = w b_2` with `b_2` built from `b_1 u*`.
pub fn reanchor_projections(
    cert: &AlmostInverseCertificate,
    a: &ToeplitzElement,
    p_new: &Projection,
    q_new: &Projection,
    tol: f64,
) -> Result<AlmostInverseCertificate> {
    let a_norm = a.norm_upper();
    let threshold = 0.5f64.min(1.0 / (4.0 * conjugation_constant() * a_norm * cert.b_norm_upper));
    let dp = cert.p.distance(p_new);
    let dq = cert.q.distance(q_new);
    for dist in [dp, dq] {
        if dist >= threshold {
            return Err(FredholmError::ProjectionsTooFar {
                distance: dist,
                threshold,
            });
        }
    }
    if dp == 0.0 && dq == 0.0 {
        return Ok(cert.clone());
    }
    let ring = a.ring().clone();
    let id = ToeplitzElement::identity(ring);

    // Range side: u* q' u = q.
    let (u, _) = conjugate_projections(q_new, &cert.q)?;
    let c1 = &(&u.adjoint() - &id) * a;
    let cert1 = perturb_inverse(cert, a, &c1, tol)?;
    let b_q = &cert1.b * &u.adjoint();
    let bound1 = cert1.b_norm_upper;
    let mid = certify(a, &cert.p, q_new, &b_q, tol)?;
    let mid = AlmostInverseCertificate {
        b_norm_upper: mid.b_norm_upper.min(bound1),
        ..mid
    };

    // Domain side: w* p' w = p.
    let (w, _) = conjugate_projections(p_new, &cert.p)?;
    let c2 = a * &(&w - &id);
    let cert2 = perturb_inverse(&mid, a, &c2, tol)?;
    let b_new = &w * &cert2.b;
    let out = certify(a, p_new, q_new, &b_new, tol)?;
    Ok(AlmostInverseCertificate {
        b_norm_upper: out.b_norm_upper.min(cert2.b_norm_upper),
        ..out
    })
}

/// Output of [`transport`]: `s` is the range projection of `a r`, and `v`
/// the partial isometry of its polar decomposition with `v* v = r` and
/// `v v* = s`.
#[derive(Debug, Clone)]
pub struct Transport {
    pub r: Projection,
    pub s: Projection,
    pub v: ToeplitzElement,
    pub rank: usize,
    /// `||s a r - a r||`.
    pub range_defect: f64,
    ar: ComplexMatrix,
}

fn check_left_evidence(a: &ToeplitzElement, cert: &AlmostInverseCertificate) -> Result<()> {
    let a_corner = corner(a, &cert.p, &cert.q);
    let right = &(&cert.b * &a_corner) - &cert.p.complement().element();
    let bound = residual_bound(&right, 0.5);
    if bound >= 1.0 {
        return Err(FredholmError::NotLeftInvertible(bound));
    }
    Ok(())
}

/// Carries a finite `r <= 1 - p` through `a`: `s` is the smallest projection
/// with `s a r = a r`, and `s ~ r`.
pub fn transport(a: &ToeplitzElement, cert: &AlmostInverseCertificate, r: &Projection) -> Result<Transport> {
    if !r.is_finite() {
        return Err(AlgebraError::NotFinite.into());
    }
    check_left_evidence(a, cert)?;
    let overlap = r.overlap(&cert.p);
    if overlap > PROJECTION_TOL {
        return Err(FredholmError::DecompositionInvalid(format!(
            "r is not below 1 - p (||r p|| = {overlap:e})"
        )));
    }
    transport_unchecked(a, r)
}

fn transport_unchecked(a: &ToeplitzElement, r: &Projection) -> Result<Transport> {
    let ring = a.ring().clone();
    let d = ring.dim();
    let ar = a * &r.element();
    let n = ar.support().max(r.support());
    let m = ar.correction().resized(n * d, n * d);
    let expected = r.rank();
    let mut rank = 0;
    let mut v = map_blocks(&ring, &m, |blk| {
        let polar = numkit::polar_decompose(blk, PROJECTION_TOL);
        rank += polar.rank;
        polar.isometry
    });
    if rank < expected {
        return Err(FredholmError::RankDrop { expected, found: rank });
    }
    ring.mask_blocks(&mut v);
    let s_mat = &v * &v.adjoint();
    let s = Projection::finite(ring.clone(), s_mat.clone())?;
    let range_defect = block_spectral_norm(&ring, &(&(&s_mat * &m) - &m));
    if range_defect > 1e-11 * m.max_abs().max(1.0) {
        return Err(FredholmError::DecompositionInvalid(format!(
            "s a r differs from a r by {range_defect:e}"
        )));
    }
    Ok(Transport {
        r: r.clone(),
        s,
        v: ToeplitzElement::finite(ring, v)?,
        rank,
        range_defect,
        ar: m,
    })
}

/// Certificate for `a` up to `(1 - r, 1 - s)` with `b' = r (ar)^+ s`.
pub fn transport_certificate(a: &ToeplitzElement, tr: &Transport, tol: f64) -> Result<AlmostInverseCertificate> {
    let ring = a.ring().clone();
    let mut pinv = map_blocks(&ring, &tr.ar, |blk| numkit::pseudo_inverse(blk, PROJECTION_TOL));
    ring.mask_blocks(&mut pinv);
    let b = ToeplitzElement::finite(ring, pinv)?;
    let b = &(&tr.r.element() * &b) * &tr.s.element();
    certify(a, &tr.r.complement(), &tr.s.complement(), &b, tol)
}

/// Transport under `q a (1-p) = 0`: also checks `s <= 1 - q` and certifies
/// `a` up to `(p + r, q + s)`, i.e. `1-q-s ~ 1-p-r` through `a`.
#[derive(Debug, Clone)]
pub struct TriangularTransport {
    pub transport: Transport,
    pub complement: AlmostInverseCertificate,
}

pub fn transport_triangular(
    a: &ToeplitzElement,
    cert: &AlmostInverseCertificate,
    r: &Projection,
    tol: f64,
) -> Result<TriangularTransport> {
    let tri = triangular_defect(a, &cert.p, &cert.q);
    if tri > PROJECTION_TOL {
        return Err(FredholmError::NotTriangular(tri));
    }
    let ring = a.ring().clone();
    if ring.num_blocks() > 1 && r.is_finite() {
        if let Some(out) = blockwise_transport_triangular(a, cert, r, tol)? {
            return Ok(out);
        }
    }
    let tr = transport(a, cert, r)?;
    let sq = tr.s.overlap(&cert.q);
    if sq > PROJECTION_TOL {
        return Err(FredholmError::DecompositionInvalid(format!(
            "s is not below 1 - q (||s q|| = {sq:e})"
        )));
    }
    let cert1 = transport_certificate(a, &tr, tol)?;
    let p_plus = cert.p.orthogonal_sum(r)?;
    let q_plus = cert.q.orthogonal_sum(&tr.s)?;
    let complement = split(
        a,
        cert,
        r,
        &p_plus.complement(),
        &tr.s,
        &q_plus.complement(),
        &cert1,
        tol,
    )?;
    Ok(TriangularTransport {
        transport: tr,
        complement,
    })
}

fn blockwise_transport_triangular(
    a: &ToeplitzElement,
    cert: &AlmostInverseCertificate,
    r: &Projection,
    tol: f64,
) -> Result<Option<TriangularTransport>> {
    let ring = a.ring();
    let mut parts = Vec::with_capacity(ring.num_blocks());
    for i in 0..ring.num_blocks() {
        parts.push(transport_triangular(
            &a.block_part(i),
            &cert.block_part(i),
            &r.block_part(i),
            tol,
        )?);
    }
    let complements: Vec<AlmostInverseCertificate> = parts.iter().map(|t| t.complement.clone()).collect();
    let Some(complement) = AlmostInverseCertificate::direct_sum(ring, &complements) else {
        return Ok(None);
    };
    let ss: Vec<Projection> = parts.iter().map(|t| t.transport.s.clone()).collect();
    let vs: Vec<ToeplitzElement> = parts.iter().map(|t| t.transport.v.clone()).collect();
    let Some(s) = Projection::direct_sum(ring, &ss) else {
        return Ok(None);
    };
    let d = ring.dim();
    let ar = a * &r.element();
    let n = ar.support().max(r.support());
    let transport = Transport {
        r: r.clone(),
        s,
        v: ToeplitzElement::direct_sum(ring, &vs)?,
        rank: parts.iter().map(|t| t.transport.rank).sum(),
        range_defect: parts.iter().map(|t| t.transport.range_defect).fold(0.0, f64::max),
        ar: ar.correction().resized(n * d, n * d),
    };
    Ok(Some(TriangularTransport { transport, complement }))
}

/// `||q a (1 - p)||`.
pub fn triangular_defect(a: &ToeplitzElement, p: &Projection, q: &Projection) -> f64 {
    let x = &(&q.element() * a) * &p.complement().element();
    x.norm_upper()
}

fn decomposition_defect(whole: &Projection, x: &Projection, y: &Projection) -> f64 {
    let sum = &x.element() + &y.element();
    let diff = &sum - &whole.element();
    diff.norm_upper().max(x.overlap(y))
}

/// From `1-p = r1 + r2`, `1-q = s1 + s2`, a certificate for `(1-r1, 1-s1)`
/// and smallness of a cross term, a certificate for `(1-r2, 1-s2)`.
#[allow(clippy::too_many_arguments)]
pub fn split(
    a: &ToeplitzElement,
    cert: &AlmostInverseCertificate,
    r1: &Projection,
    r2: &Projection,
    s1: &Projection,
    s2: &Projection,
    cert1: &AlmostInverseCertificate,
    tol: f64,
) -> Result<AlmostInverseCertificate> {
    let dr = decomposition_defect(&cert.p.complement(), r1, r2);
    let ds = decomposition_defect(&cert.q.complement(), s1, s2);
    if dr > PROJECTION_TOL || ds > PROJECTION_TOL {
        return Err(FredholmError::DecompositionInvalid(format!("defects {dr:e} / {ds:e}")));
    }
    let d1 = cert1
        .p
        .distance(&r1.complement())
        .max(cert1.q.distance(&s1.complement()));
    if d1 > PROJECTION_TOL {
        return Err(FredholmError::DecompositionInvalid(
            "second certificate is not for (1 - r1, 1 - s1)".into(),
        ));
    }
    let x21 = &(&s2.element() * a) * &r1.element();
    let x12 = &(&s1.element() * a) * &r2.element();
    let n21 = x21.norm_upper();
    let n12 = x12.norm_upper();
    let limit = 1.0 / cert.b_norm_upper;
    let p2 = r2.complement();
    let q2 = s2.complement();
    if n21 <= 1e-12 {
        let b2 = &(&r2.element() * &cert.b) * &s2.element();
        return certify(a, &p2, &q2, &b2, tol);
    }
    if n21 < limit {
        let a_hat = a - &x21;
        let cert_hat = perturb_inverse(cert, a, &(-&x21), tol)?;
        let b2 = &(&r2.element() * &cert_hat.b) * &s2.element();
        let _ = a_hat;
        return certify(a, &p2, &q2, &b2, tol);
    }
    if n12 < limit {
        let adj = split(&a.adjoint(), &cert.adjoint(), s1, s2, r1, r2, &cert1.adjoint(), tol)?;
        return certify(a, &p2, &q2, &adj.b.adjoint(), tol);
    }
    Err(FredholmError::SmallnessFails(n21, n12, limit))
}

/// Triangular form: `q'` with `q' a (1-p) = 0` and a certificate for `(p, q')`.
#[derive(Debug, Clone)]
pub struct Triangularized {
    pub q_prime: Projection,
    pub cert: AlmostInverseCertificate,
}

/// `u = 1 + q a b` is invertible with `u^-1 = 1 - q a b`; `q'` is the range
/// projection of `(u^-1)* q`, obtained by transport, and `b' = b u^-1 (1-q')`.
pub fn triangularize(a: &ToeplitzElement, cert: &AlmostInverseCertificate, tol: f64) -> Result<Triangularized> {
    if triangular_defect(a, &cert.p, &cert.q) <= 1e-12 {
        return Ok(Triangularized {
            q_prime: cert.q.clone(),
            cert: cert.clone(),
        });
    }
    let ring = a.ring().clone();
    if ring.num_blocks() > 1 {
        let mut parts = Vec::with_capacity(ring.num_blocks());
        for i in 0..ring.num_blocks() {
            parts.push(triangularize(&a.block_part(i), &cert.block_part(i), tol)?.cert);
        }
        if let Some(out) = AlmostInverseCertificate::direct_sum(&ring, &parts) {
            return Ok(Triangularized {
                q_prime: out.q.clone(),
                cert: out,
            });
        }
    }
    let cert = if cert.max_residual() > 1e-12 {
        verify_up_to(a, &cert.p, &cert.q, &cert.b, 1e-13)?
    } else {
        cert.clone()
    };
    let id = ToeplitzElement::identity(ring.clone());
    let qab = &(&cert.q.element() * a) * &cert.b;
    let u_inv = &id - &qab;
    let u_inv_adj = u_inv.adjoint();
    // (u^-1)* is invertible up to (1-q, 1-q) with inverse q.
    let qe = cert.q.element();
    let evidence = certify(&u_inv_adj, &cert.q.complement(), &cert.q.complement(), &qe, tol)?;
    let tr = transport(&u_inv_adj, &evidence, &cert.q)?;
    let q_prime = tr.s;
    let b_new = &(&cert.b * &u_inv) * &q_prime.complement().element();
    let out = verify_up_to(a, &cert.p, &q_prime, &b_new, tol)?;
    let defect = triangular_defect(a, &cert.p, &q_prime);
    if defect > PROJECTION_TOL {
        return Err(FredholmError::NotTriangular(defect));
    }
    Ok(Triangularized { q_prime, cert: out })
}

/// Variant through the adjoint: `p'` with `(1-q) a p' = 0` and a
/// certificate for `(p', q)`.
pub fn triangularize_domain(
    a: &ToeplitzElement,
    cert: &AlmostInverseCertificate,
    tol: f64,
) -> Result<(Projection, AlmostInverseCertificate)> {
    let adj = triangularize(&a.adjoint(), &cert.adjoint(), tol)?;
    let p_prime = adj.q_prime;
    let out = verify_up_to(a, &p_prime, &cert.q, &adj.cert.b.adjoint(), tol)?;
    Ok((p_prime, out))
}

/// One member of the family produced by [`transport_unit`].
#[derive(Debug, Clone)]
pub struct UnitTransport {
    pub n: usize,
    pub q_n: Projection,
    pub cert: AlmostInverseCertificate,
}

/// For a triangular certificate and units `P_n >= p`: `q_n = q + s_n` with
/// `s_n` transported from `P_n - p`, certified up to `(P_n, q_n)`.
pub fn transport_unit(
    a: &ToeplitzElement,
    cert: &AlmostInverseCertificate,
    units: &[usize],
    tol: f64,
) -> Result<Vec<UnitTransport>> {
    let tri = triangular_defect(a, &cert.p, &cert.q);
    if tri > PROJECTION_TOL {
        return Err(FredholmError::NotTriangular(tri));
    }
    let ring = a.ring().clone();
    let mut sorted = units.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut out: Vec<UnitTransport> = Vec::with_capacity(sorted.len());
    for &n in &sorted {
        let unit = Projection::unit(ring.clone(), n);
        if !cert.p.is_below(&unit, PROJECTION_TOL) {
            return Err(FredholmError::UnitNotAbove(n));
        }
        let r = unit.difference(&cert.p)?;
        let tr = transport(a, cert, &r)?;
        let q_n = cert.q.orthogonal_sum(&tr.s)?;
        let cert1 = transport_certificate(a, &tr, tol)?;
        let cert_n = split(a, cert, &r, &unit.complement(), &tr.s, &q_n.complement(), &cert1, tol)?;
        let leak = &(&q_n.complement().element() * a) * &r.element();
        let leak = leak.norm_upper();
        if leak > PROJECTION_TOL {
            return Err(FredholmError::NotTriangular(leak));
        }
        let lhs = &projection_class(&q_n)? - &projection_class(&cert.q)?;
        let rhs = &projection_class(&unit)? - &projection_class(&cert.p)?;
        if lhs != rhs {
            return Err(FredholmError::RankDrop {
                expected: rhs.0.iter().sum::<i64>() as usize,
                found: lhs.0.iter().sum::<i64>() as usize,
            });
        }
        if let Some(prev) = out.last() {
            if !prev.q_n.is_below(&q_n, PROJECTION_TOL) {
                return Err(FredholmError::DecompositionInvalid(format!(
                    "q_{} is not below q_{n}",
                    prev.n
                )));
            }
        }
        out.push(UnitTransport { n, q_n, cert: cert_n });
    }
    Ok(out)
}

/// Index strategy.
#[derive(Debug, Clone)]
pub enum Strategy {
    /// Wiener-Hopf seeded standard pair, then the Atkinson route.
    Auto { modular_inverse: Option<ToeplitzElement> },
    /// Atkinson route with a given or auto-seeded modular inverse.
    Atkinson { modular_inverse: Option<ToeplitzElement> },
    /// A caller-supplied candidate certificate.
    Direct {
        p: Projection,
        q: Projection,
        b: ToeplitzElement,
    },
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Auto { .. } => "auto",
            Strategy::Atkinson { .. } => "atkinson",
            Strategy::Direct { .. } => "direct",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// Route that produced the certificate (`standard`, `atkinson`, `direct`).
    pub strategy: String,
    pub res_left: f64,
    pub res_right: f64,
    pub b_norm_upper: f64,
    pub a_norm_upper: f64,
    pub a_norm_lower: f64,
    pub trunc: usize,
    pub seed_residual: Option<f64>,
    pub seed_span: Option<usize>,
    pub p_support: usize,
    pub q_support: usize,
}

#[derive(Debug, Clone)]
pub struct IndexResult {
    pub k_class: KClass,
    pub certificate: AlmostInverseCertificate,
    pub oracle_class: Option<KClass>,
    pub diagnostics: Diagnostics,
}

/// Classical oracle: minus the winding number of each block determinant.
pub fn index_oracle(a: &ToeplitzElement, margin: f64) -> std::result::Result<KClass, LaurentError> {
    let w = a.symbol().winding_number(margin)?;
    Ok(KClass(w.iter().map(|x| -x).collect()))
}

fn seed_target(tol: f64) -> f64 {
    (tol / 32.0).max(1e-13)
}

struct Route {
    cert: AlmostInverseCertificate,
    name: &'static str,
    seed_residual: Option<f64>,
    seed_span: Option<usize>,
}

/// Index of `a` in `K(F)`.
pub fn index(a: &ToeplitzElement, strategy: &Strategy, opts: &EngineOptions) -> Result<IndexResult> {
    if a.symbol().is_zero() {
        return Err(FredholmError::NotFredholm("symbol is zero".into()));
    }
    let oracle = index_oracle(a, opts.margin);
    let needs_seed = matches!(
        strategy,
        Strategy::Auto { .. } | Strategy::Atkinson { modular_inverse: None }
    );
    if let Err(LaurentError::RootNearCircle { root, margin }) = &oracle {
        if needs_seed {
            return Err(FredholmError::NotFredholm(format!(
                "symbol root {:.6}{:+.6}i within {margin} of the unit circle",
                root.re, root.im
            )));
        }
    }
    let blockwise = a.ring().num_blocks() > 1 && needs_seed;
    let route = match strategy {
        _ if blockwise => blockwise_route(a, strategy, opts)?,
        Strategy::Auto { modular_inverse } => match standard_route(a, opts) {
            Ok(r) => r,
            Err(first) => match atkinson_route(a, modular_inverse.as_ref(), opts) {
                Ok(r) => r,
                Err(_) => return Err(first),
            },
        },
        Strategy::Atkinson { modular_inverse } => atkinson_route(a, modular_inverse.as_ref(), opts)?,
        Strategy::Direct { p, q, b } => Route {
            cert: verify_up_to(a, p, q, b, opts.tol)?,
            name: "direct",
            seed_residual: None,
            seed_span: None,
        },
    };
    let cert = route.cert;
    let k_class = cert.class()?;
    let diagnostics = Diagnostics {
        strategy: route.name.to_string(),
        res_left: cert.res_left,
        res_right: cert.res_right,
        b_norm_upper: cert.b_norm_upper,
        a_norm_upper: a.norm_upper(),
        a_norm_lower: a.norm_lower(opts.trunc),
        trunc: opts.trunc,
        seed_residual: route.seed_residual,
        seed_span: route.seed_span,
        p_support: cert.p.support(),
        q_support: cert.q.support(),
    };
    Ok(IndexResult {
        k_class,
        certificate: cert,
        oracle_class: oracle.ok(),
        diagnostics,
    })
}

/// Certifies each ring block on its own and assembles the direct sum; the
/// residuals and `b` bound of a direct sum are the largest blockwise ones.
fn blockwise_route(a: &ToeplitzElement, strategy: &Strategy, opts: &EngineOptions) -> Result<Route> {
    let ring = a.ring();
    let mut parts = Vec::with_capacity(ring.num_blocks());
    for i in 0..ring.num_blocks() {
        parts.push(index(&a.block_part(i), strategy, opts)?);
    }
    let certs: Vec<AlmostInverseCertificate> = parts.iter().map(|r| r.certificate.clone()).collect();
    let cert = AlmostInverseCertificate::direct_sum(ring, &certs).ok_or(FredholmError::CornerSingular)?;
    let names: Vec<&str> = parts.iter().map(|r| r.diagnostics.strategy.as_str()).collect();
    let name = if names.iter().all(|n| *n == names[0]) {
        if names[0] == "standard" {
            "standard"
        } else {
            "atkinson"
        }
    } else {
        "blockwise"
    };
    let seed_residual = parts
        .iter()
        .filter_map(|r| r.diagnostics.seed_residual)
        .reduce(f64::max);
    let seed_span = parts.iter().filter_map(|r| r.diagnostics.seed_span).max();
    Ok(Route {
        cert,
        name,
        seed_residual,
        seed_span,
    })
}

/// Per-component shifts distributing each block's winding; the first entry
/// is the even split, followed by alternatives.
fn shift_candidates(ring: &BaseRing, winding: &[i64]) -> Vec<Vec<i64>> {
    let even = |w: i64, m: usize| -> Vec<i64> {
        let m_i = m as i64;
        let base = w.div_euclid(m_i);
        let rem = w.rem_euclid(m_i) as usize;
        (0..m).map(|k| base + i64::from(k < rem)).collect()
    };
    let base: Vec<Vec<i64>> = ring
        .block_sizes()
        .iter()
        .zip(winding)
        .map(|(&m, &w)| even(w, m))
        .collect();
    let flatten = |blocks: &[Vec<i64>]| -> Vec<i64> { blocks.iter().flatten().copied().collect() };
    let mut out = vec![flatten(&base)];
    for (i, &m) in ring.block_sizes().iter().enumerate() {
        if m == 1 {
            continue;
        }
        for from in 0..m {
            for to in 0..m {
                if from == to {
                    continue;
                }
                for step in 1..=2 {
                    let mut blocks = base.clone();
                    blocks[i][from] -= step;
                    blocks[i][to] += step;
                    let cand = flatten(&blocks);
                    if !out.contains(&cand) {
                        out.push(cand);
                    }
                }
            }
        }
    }
    out
}

/// Standard pair `p = P_n`, `q = (+)_alpha P_{n + s_alpha}` with the shifts
/// summing to each block's winding, inverted from the seeded parametrix.
pub fn standard_pairs(a: &ToeplitzElement, winding: &[i64], extra: usize) -> Vec<(Projection, Projection)> {
    let ring = a.ring().clone();
    shift_candidates(&ring, winding)
        .into_iter()
        .map(|s| {
            let lift = s.iter().map(|&x| (-x).max(0) as usize).max().unwrap_or(0);
            let n = a.support().max(lift) + extra;
            let counts: Vec<usize> = s.iter().map(|&x| (n as i64 + x) as usize).collect();
            (
                Projection::unit(ring.clone(), n),
                Projection::coordinates(ring.clone(), &counts),
            )
        })
        .collect()
}

fn standard_route(a: &ToeplitzElement, opts: &EngineOptions) -> Result<Route> {
    let seed = laurent::inverse_seed(a.symbol(), opts.margin, seed_target(opts.tol))?;
    let g = ToeplitzElement::from_symbol(seed.symbol.clone());
    let mut last = FredholmError::CornerSingular;
    for (k, (p, q)) in standard_pairs(a, &seed.winding, 0).into_iter().enumerate() {
        if k >= 12 {
            break;
        }
        let b = match corner_inverse(a, &p, &q, &g) {
            Ok(b) => b,
            Err(e) => {
                last = e;
                continue;
            }
        };
        match verify_up_to(a, &p, &q, &b, opts.tol) {
            Ok(cert) => {
                return Ok(Route {
                    cert,
                    name: "standard",
                    seed_residual: Some(seed.residual_bound),
                    seed_span: Some(seed.symbol.span()),
                })
            }
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// Certificate for `a` with a standard pair offset by `extra` coordinates;
/// used to produce distinct valid pairs.
pub fn standard_certificate(
    a: &ToeplitzElement,
    extra: usize,
    opts: &EngineOptions,
) -> Result<AlmostInverseCertificate> {
    let seed = laurent::inverse_seed(a.symbol(), opts.margin, seed_target(opts.tol))?;
    let g = ToeplitzElement::from_symbol(seed.symbol);
    let mut last = FredholmError::CornerSingular;
    for (p, q) in standard_pairs(a, &seed.winding, extra).into_iter().take(12) {
        match corner_inverse(a, &p, &q, &g).and_then(|b| verify_up_to(a, &p, &q, &b, opts.tol)) {
            Ok(cert) => return Ok(cert),
            Err(e) => last = e,
        }
    }
    Err(last)
}

fn atkinson_route(
    a: &ToeplitzElement,
    modular_inverse: Option<&ToeplitzElement>,
    opts: &EngineOptions,
) -> Result<Route> {
    let (b_mod, seed_residual, seed_span) = match modular_inverse {
        Some(b) => (b.clone(), None, None),
        None => {
            let seed = laurent::inverse_seed(a.symbol(), opts.margin, seed_target(opts.tol)).map_err(|e| match e {
                LaurentError::SeedFailure(x) => FredholmError::SeedFailure(x),
                other => other.into(),
            })?;
            let span = seed.symbol.span();
            (
                ToeplitzElement::from_symbol(seed.symbol),
                Some(seed.residual_bound),
                Some(span),
            )
        }
    };
    let cert = atkinson_pair_with(a, &b_mod, modular_inverse.is_none(), 0, opts)?;
    Ok(Route {
        cert,
        name: "atkinson",
        seed_residual,
        seed_span,
    })
}

/// Atkinson route with an exact modular inverse (`a b - 1` and `b a - 1`
/// symbol-zero).
pub fn atkinson_pair(
    a: &ToeplitzElement,
    b_mod: &ToeplitzElement,
    opts: &EngineOptions,
) -> Result<AlmostInverseCertificate> {
    atkinson_pair_with(a, b_mod, false, 0, opts)
}

/// Atkinson route, `extra` coordinates past the minimal cut.
///
/// `q = P_n` with the corner of `a b_mod` invertible; `p` is the projection
/// onto the kernel of `(1 - P_n) a`, found inside
/// `ran(b_mod P_n) + ran(P_N2)` with `N2` the support of `b_mod a - 1`.
pub fn atkinson_pair_with(
    a: &ToeplitzElement,
    b_mod: &ToeplitzElement,
    seeded: bool,
    extra: usize,
    opts: &EngineOptions,
) -> Result<AlmostInverseCertificate> {
    let ring = a.ring().clone();
    let d = ring.dim();
    let id = ToeplitzElement::identity(ring.clone());
    let d1 = &(a * b_mod) - &id;
    let d2 = &(b_mod * a) - &id;
    let sym_defect = d1.symbol().sup_norm_upper().max(d2.symbol().sup_norm_upper());
    if seeded {
        if sym_defect >= 1.0 {
            return Err(FredholmError::SeedFailure(sym_defect));
        }
    } else if sym_defect > 1e-12 * (1.0 + a.norm_upper() * b_mod.norm_upper()) {
        return Err(FredholmError::NotModularInverse(sym_defect));
    }
    let n = if seeded {
        shortest_cut(&d1, 0.5) + extra
    } else {
        d1.support().max(d2.support()) + extra
    };
    let q = Projection::unit(ring.clone(), n);
    let cq = q.complement().element();
    let cut = &(&cq * &d1) * &cq;
    let cut_norm = residual_bound(&cut, 0.5);
    if cut_norm >= 1.0 {
        return Err(FredholmError::NotModularInverse(cut_norm));
    }
    // Search space for ker (1 - P_n) a.
    let bp = b_mod * &q.element();
    let n2 = d2.support();
    let rows = bp.support().max(n2).max(1);
    let mut cols: Vec<Vec<C64>> = Vec::new();
    for j in 0..n * d {
        cols.push((0..rows * d).map(|i| bp.correction().get_or_zero(i, j)).collect());
    }
    for j in 0..n2 * d {
        cols.push(
            (0..rows * d)
                .map(|i| if i == j { one() } else { C64::new(0.0, 0.0) })
                .collect(),
        );
    }
    let p = if cols.is_empty() {
        Projection::zero(ring.clone())
    } else {
        let raw = ComplexMatrix::from_fn(rows * d, cols.len(), |i, j| cols[j][i]);
        let basis = orthonormal_columns(&raw);
        if basis.cols() == 0 {
            Projection::zero(ring.clone())
        } else {
            let reach = a.symbol().positive_reach();
            let out_rows = rows + reach + a.support();
            let win = a.window(0, 0, out_rows, rows);
            let mut image = &win * &basis;
            for i in 0..(n * d).min(image.rows()) {
                for x in image.row_mut(i) {
                    *x = C64::new(0.0, 0.0);
                }
            }
            let cut_rel = if seeded { sym_defect.sqrt().max(1e-9) } else { 1e-9 };
            let scale = a.norm_upper().max(1.0);
            let null = null_space_abs(&image, cut_rel * scale);
            if null.cols() == 0 {
                Projection::zero(ring.clone())
            } else {
                let x = &basis * &null;
                let mut proj = &x * &x.adjoint();
                ring.mask_blocks(&mut proj);
                Projection::finite(ring.clone(), proj)?
            }
        }
    };
    let b = corner_inverse(a, &p, &q, b_mod)?;
    verify_up_to(a, &p, &q, &b, opts.tol)
}

/// Smallest `n` with a certified `||(1 - P_n) d (1 - P_n)|| <= target`,
/// scanning the tail Frobenius norms of the correction.
fn shortest_cut(defect: &ToeplitzElement, target: f64) -> usize {
    let d = defect.ring().dim();
    let sym = defect.symbol().sup_norm_upper();
    let k = defect.correction();
    let total = defect.support();
    // tail[n] = Frobenius norm of the block past coordinate n
    let mut tail = vec![0.0f64; total + 1];
    for n in (0..total).rev() {
        let mut add = 0.0;
        let lo = n * d;
        for i in lo..total * d {
            for j in lo..total * d {
                if i < lo + d || j < lo + d {
                    add += k[(i, j)].norm_sqr();
                }
            }
        }
        tail[n] = tail[n + 1] + add;
    }
    (0..=total).find(|&n| sym + tail[n].sqrt() <= target).unwrap_or(total)
}

fn orthonormal_columns(m: &ComplexMatrix) -> ComplexMatrix {
    let dec = numkit::svd(m);
    let top = dec.singular_values.first().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..dec.singular_values.len())
        .filter(|&k| top > 0.0 && dec.singular_values[k] > 1e-10 * top)
        .collect();
    ComplexMatrix::from_fn(m.rows(), keep.len(), |i, j| dec.u[(i, keep[j])])
}

/// Right singular vectors with singular value at or below `cut`.
fn null_space_abs(m: &ComplexMatrix, cut: f64) -> ComplexMatrix {
    let n = m.cols();
    let padded = if m.rows() < n { m.resized(n, n) } else { m.clone() };
    let dec = numkit::svd(&padded);
    let null: Vec<usize> = (0..dec.singular_values.len().min(n))
        .filter(|&k| dec.singular_values[k] <= cut)
        .collect();
    ComplexMatrix::from_fn(n, null.len(), |i, j| dec.v[(i, null[j])])
}
