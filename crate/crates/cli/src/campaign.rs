//! Property campaigns over random instances.

use std::fmt;
use std::str::FromStr;

use fredholm_core::algebra::{projection_class, KClass, Projection, ToeplitzElement};
use fredholm_core::fredholm::{
    self, conjugate_projections_matrix, conjugation_constant, index, index_oracle, perturb_inverse,
    AlmostInverseCertificate, EngineOptions, FredholmError, Strategy,
};
use fredholm_core::laurent::{self, BaseRing};
use fredholm_core::numkit::{self, ComplexMatrix, C64};
use rand::Rng;
use serde_json::{json, Value};

use crate::description::{matrix_to_json, OperatorDescription};
use crate::gen;
use crate::report::TrialRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CampaignKind {
    IndexTheorem,
    Stability,
    LocalConstancy,
    WellDefined,
    UnitaryBound,
    Transport,
    Oracle,
    PerturbationBound,
    BlockOracle,
}

impl CampaignKind {
    pub const ALL: [CampaignKind; 9] = [
        CampaignKind::IndexTheorem,
        CampaignKind::Stability,
        CampaignKind::LocalConstancy,
        CampaignKind::WellDefined,
        CampaignKind::UnitaryBound,
        CampaignKind::Transport,
        CampaignKind::Oracle,
        CampaignKind::PerturbationBound,
        CampaignKind::BlockOracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CampaignKind::IndexTheorem => "index-theorem",
            CampaignKind::Stability => "stability",
            CampaignKind::LocalConstancy => "local-constancy",
            CampaignKind::WellDefined => "well-defined",
            CampaignKind::UnitaryBound => "unitary-bound",
            CampaignKind::Transport => "transport",
            CampaignKind::Oracle => "oracle",
            CampaignKind::PerturbationBound => "perturbation-bound",
            CampaignKind::BlockOracle => "block-oracle",
        }
    }
}

impl fmt::Display for CampaignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CampaignKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown campaign kind `{s}`"))
    }
}

/// Distinct pairs required per trial of the well-defined campaign.
pub const WELL_DEFINED_PAIRS: usize = 50;

#[derive(Debug, Clone)]
pub struct CampaignOutcome {
    pub records: Vec<TrialRecord>,
    pub passed: usize,
    pub failed: usize,
}

pub fn run_campaign(kind: CampaignKind, trials: usize, seed: u64, opts: &EngineOptions) -> CampaignOutcome {
    let records: Vec<TrialRecord> = (0..trials).map(|t| run_trial(kind, t, seed, opts)).collect();
    let passed = records.iter().filter(|r| r.pass).count();
    CampaignOutcome {
        failed: records.len() - passed,
        passed,
        records,
    }
}

pub fn run_trial(kind: CampaignKind, trial: usize, seed: u64, opts: &EngineOptions) -> TrialRecord {
    let mut rng = gen::trial_rng(seed, trial);
    let mut rec = TrialRecord::new(trial);
    let outcome = match kind {
        CampaignKind::IndexTheorem => index_theorem(&mut rng, opts, &mut rec),
        CampaignKind::Stability => stability(&mut rng, opts, &mut rec),
        CampaignKind::LocalConstancy => local_constancy(&mut rng, opts, &mut rec),
        CampaignKind::WellDefined => well_defined(&mut rng, opts, &mut rec),
        CampaignKind::UnitaryBound => unitary_bound(&mut rng, &mut rec),
        CampaignKind::Transport => transport(&mut rng, opts, &mut rec),
        CampaignKind::Oracle => oracle(&mut rng, opts, &mut rec),
        CampaignKind::PerturbationBound => perturbation_bound(&mut rng, opts, &mut rec),
        CampaignKind::BlockOracle => block_oracle(&mut rng, opts, &mut rec),
    };
    match outcome {
        Ok(pass) => rec.pass = pass,
        Err(e) => {
            rec.pass = false;
            rec.note = Some(e.to_string());
        }
    }
    if rec.pass {
        rec.instance = None;
    }
    rec
}

fn describe(a: &ToeplitzElement) -> Value {
    serde_json::to_value(OperatorDescription::from_element(a, None)).expect("descriptions serialize")
}

fn auto() -> Strategy {
    Strategy::Auto { modular_inverse: None }
}

fn class_of(a: &ToeplitzElement, opts: &EngineOptions) -> Result<KClass, FredholmError> {
    Ok(index(a, &auto(), opts)?.k_class)
}

fn oracle(rng: &mut impl Rng, opts: &EngineOptions, rec: &mut TrialRecord) -> Result<bool, FredholmError> {
    let a = gen::scalar_element(rng);
    rec.instance = Some(json!({ "a": describe(&a) }));
    let res = index(&a, &auto(), opts)?;
    rec.observed = Some(res.k_class.0.clone());
    rec.expected = res.oracle_class.as_ref().map(|k| k.0.clone());
    rec.metric("res", res.certificate.max_residual());
    Ok(res.oracle_class.as_ref() == Some(&res.k_class))
}

fn block_oracle(rng: &mut impl Rng, opts: &EngineOptions, rec: &mut TrialRecord) -> Result<bool, FredholmError> {
    let k = rng.gen_range(2..=3);
    let ring = gen::block_ring(rng, k);
    let a = gen::block_element(rng, &ring, 4);
    rec.instance = Some(json!({ "a": describe(&a) }));
    let expected = index_oracle(&a, opts.margin)?;
    rec.expected = Some(expected.0.clone());
    let res = index(&a, &auto(), opts)?;
    rec.observed = Some(res.k_class.0.clone());
    rec.metric("res", res.certificate.max_residual());
    rec.metric("dim", ring.dim() as f64);
    Ok(res.k_class == expected)
}

fn index_theorem(rng: &mut impl Rng, opts: &EngineOptions, rec: &mut TrialRecord) -> Result<bool, FredholmError> {
    let a = gen::scalar_element(rng);
    let b = gen::scalar_element(rng);
    rec.instance = Some(json!({ "a": describe(&a), "b": describe(&b) }));
    let ab = &a * &b;
    let ia = class_of(&a, opts)?;
    let ib = class_of(&b, opts)?;
    let iab = class_of(&ab, opts)?;
    let sum = &ia + &ib;
    rec.expected = Some(sum.0.clone());
    rec.observed = Some(iab.0.clone());
    Ok(iab == sum)
}

fn stability(rng: &mut impl Rng, opts: &EngineOptions, rec: &mut TrialRecord) -> Result<bool, FredholmError> {
    let a = gen::scalar_element(rng);
    let f = gen::finite_element(rng, a.ring());
    rec.instance = Some(json!({ "a": describe(&a), "f": describe(&f) }));
    let ia = class_of(&a, opts)?;
    let iaf = class_of(&(&a + &f), opts)?;
    rec.metric("f_norm_upper", f.norm_upper());
    rec.expected = Some(ia.0.clone());
    rec.observed = Some(iaf.0.clone());
    Ok(ia == iaf)
}

/// `c` with `||c|| = scale`, mixing a short symbol and a finite part.
fn random_perturbation(rng: &mut impl Rng, ring: &BaseRing, scale: f64, with_symbol: bool) -> ToeplitzElement {
    let f = gen::finite_element(rng, ring);
    let c = if with_symbol {
        &ToeplitzElement::from_symbol(gen::small_symbol(rng, ring)) + &f
    } else {
        f
    };
    let n = c.norm_upper();
    if n == 0.0 {
        return c;
    }
    c.scale(C64::new(scale / n, 0.0))
}

fn local_constancy(rng: &mut impl Rng, opts: &EngineOptions, rec: &mut TrialRecord) -> Result<bool, FredholmError> {
    let a = gen::scalar_element(rng);
    let res = index(&a, &auto(), opts)?;
    let cert = res.certificate;
    let ratio = rng.gen_range(0.2..=1.0);
    let target = ratio * 0.5 / cert.b_norm_upper;
    // Perturbations that move a symbol root into the margin band cannot be
    // seeded; those are redrawn, and the last attempt is symbol-free.
    let mut resamples = 0;
    let (c, ac) = loop {
        let with_symbol = resamples < 8;
        let c = random_perturbation(rng, a.ring(), target, with_symbol);
        let ac = &a + &c;
        match index_oracle(&ac, opts.margin) {
            Ok(_) => break (c, ac),
            Err(_) => resamples += 1,
        }
    };
    rec.instance = Some(json!({ "a": describe(&a), "c": describe(&c) }));
    rec.metric("c_norm_upper", c.norm_upper());
    rec.metric("b_norm_upper", cert.b_norm_upper);
    rec.metric("resamples", resamples as f64);
    let moved = perturb_inverse(&cert, &a, &c, opts.tol)?;
    let moved_class = moved.class()?;
    let fresh = class_of(&ac, opts)?;
    rec.expected = Some(res.k_class.0.clone());
    rec.observed = Some(fresh.0.clone());
    Ok(fresh == res.k_class && moved_class == res.k_class)
}

fn perturbation_bound(rng: &mut impl Rng, opts: &EngineOptions, rec: &mut TrialRecord) -> Result<bool, FredholmError> {
    let a = gen::scalar_element(rng);
    let cert = index(&a, &auto(), opts)?.certificate;
    let beta = rng.gen_range(0.05..=0.9);
    let with_symbol = rng.gen_bool(0.5);
    let c = random_perturbation(rng, a.ring(), beta / cert.b_norm_upper, with_symbol);
    rec.instance = Some(json!({ "a": describe(&a), "c": describe(&c) }));
    let b = cert.b_norm_upper;
    let cn = c.norm_upper();
    let bound = b / (1.0 - b * cn);
    let out = perturb_inverse(&cert, &a, &c, opts.tol)?;
    rec.metric("beta", b * cn);
    rec.metric("bound", bound);
    rec.metric("b_norm_upper", out.b_norm_upper);
    rec.metric("res", out.max_residual());
    Ok(out.b_norm_upper <= bound + 1e-8 && out.max_residual() < 1.0 && out.class()? == cert.class()?)
}

fn unitary_bound(rng: &mut impl Rng, rec: &mut TrialRecord) -> Result<bool, FredholmError> {
    let (p, q) = gen::projection_pair(rng);
    rec.instance = Some(json!({ "p": matrix_to_json(&p), "q": matrix_to_json(&q) }));
    let (u, info) = conjugate_projections_matrix(&p, &q)?;
    let conj = &(&u.adjoint() * &p) * &u;
    let conj_err = numkit::spectral_norm(&(&conj - &q));
    let unitary_err = numkit::spectral_norm(&(&(&u.adjoint() * &u) - &ComplexMatrix::identity(u.rows())));
    rec.metric("dim", p.rows() as f64);
    rec.metric("distance", info.distance);
    rec.metric("deviation", info.deviation);
    rec.metric("conjugation_error", conj_err);
    rec.metric("unitarity_error", unitary_err);
    Ok(conj_err <= 1e-10
        && unitary_err <= 1e-10
        && info.distance < 0.5
        && info.deviation <= conjugation_constant() * info.distance + 1e-9)
}

fn transport(rng: &mut impl Rng, opts: &EngineOptions, rec: &mut TrialRecord) -> Result<bool, FredholmError> {
    let a = if rng.gen_bool(0.7) {
        gen::scalar_element(rng)
    } else {
        let ring = gen::block_ring(rng, 2);
        gen::block_element(rng, &ring, 4)
    };
    rec.instance = Some(json!({ "a": describe(&a) }));
    let res = index(&a, &auto(), opts)?;
    let tri = fredholm::triangularize(&a, &res.certificate, opts.tol)?;
    let cert = tri.cert;
    let len = cert.p.support() + rng.gen_range(2..=6);
    let r = gen::projection_below_complement(rng, &cert.p, len);
    let out = fredholm::transport_triangular(&a, &cert, &r, opts.tol)?;
    let tr = &out.transport;
    let ar = &a * &r.element();
    let rank_ar = numkit::rank(ar.correction(), 1e-10);
    let sar = &(&tr.s.element() * &ar) - &ar;
    let range_err = sar.norm_upper();
    let v = &tr.v;
    let initial = (&(&v.adjoint() * v) - &r.element()).norm_upper();
    let fin = (&(v * &v.adjoint()) - &tr.s.element()).norm_upper();
    let cls_r = projection_class(&r)?;
    let cls_s = projection_class(&tr.s)?;
    rec.expected = Some(cls_r.0.clone());
    rec.observed = Some(cls_s.0.clone());
    rec.metric("rank_r", r.rank() as f64);
    rec.metric("rank_s", tr.s.rank() as f64);
    rec.metric("rank_ar", rank_ar as f64);
    rec.metric("range_error", range_err);
    rec.metric("isometry_error", initial.max(fin));
    rec.metric("complement_res", out.complement.max_residual());
    let complement_ok = out.complement.max_residual() < 1.0 && out.complement.class()? == res.k_class;
    Ok(cls_r == cls_s && range_err <= 1e-11 && tr.s.rank() == rank_ar && initial.max(fin) <= 1e-9 && complement_ok)
}

/// Entrywise equality to 1e-8.
fn same_projection(p: &Projection, q: &Projection) -> bool {
    if p.is_finite() != q.is_finite() {
        return false;
    }
    let n = p.finite_part().rows().max(q.finite_part().rows());
    let diff = &p.finite_part().resized(n, n) - &q.finite_part().resized(n, n);
    diff.max_abs() < 1e-8
}

/// A certified pair `(p, q)` and the route that produced it.
#[derive(Debug, Clone)]
pub struct FamilyMember {
    pub route: &'static str,
    pub cert: AlmostInverseCertificate,
    pub k_class: KClass,
}

/// Certificates for one element from several routes: standard pairs at
/// growing cut, seeded Atkinson pairs at growing cut, the triangularized
/// and domain-triangularized forms, and transported units re-verified
/// through the direct strategy.
pub fn well_defined_family(
    a: &ToeplitzElement,
    opts: &EngineOptions,
    min_pairs: usize,
) -> Result<Vec<FamilyMember>, FredholmError> {
    let mut out: Vec<FamilyMember> = Vec::new();
    let push = |out: &mut Vec<FamilyMember>,
                route: &'static str,
                cert: AlmostInverseCertificate|
     -> Result<(), FredholmError> {
        let dup = out
            .iter()
            .any(|m| same_projection(&m.cert.p, &cert.p) && same_projection(&m.cert.q, &cert.q));
        if !dup {
            let k_class = cert.class()?;
            out.push(FamilyMember { route, cert, k_class });
        }
        Ok(())
    };
    let per_route = (min_pairs / 5).max(2);
    for extra in 0..per_route {
        push(&mut out, "standard", fredholm::standard_certificate(a, extra, opts)?)?;
    }
    let seed = laurent::inverse_seed(a.symbol(), opts.margin, (opts.tol / 32.0).max(1e-13))?;
    let g = ToeplitzElement::from_symbol(seed.symbol);
    for extra in 0..per_route {
        push(
            &mut out,
            "atkinson",
            fredholm::atkinson_pair_with(a, &g, true, extra, opts)?,
        )?;
    }
    let base = fredholm::standard_certificate(a, 0, opts)?;
    let tri = fredholm::triangularize(a, &base, opts.tol)?;
    push(&mut out, "triangular", tri.cert.clone())?;
    let (_, dom) = fredholm::triangularize_domain(a, &base, opts.tol)?;
    push(&mut out, "triangular-domain", dom)?;
    let start = tri.cert.p.support().max(1);
    let mut n = start;
    while out.len() < min_pairs && n < start + 4 * min_pairs {
        let units = fredholm::transport_unit(a, &tri.cert, &[n], opts.tol)?;
        for u in units {
            let direct = Strategy::Direct {
                p: u.cert.p.clone(),
                q: u.cert.q.clone(),
                b: u.cert.b.clone(),
            };
            let res = index(a, &direct, opts)?;
            push(&mut out, "transported-unit", res.certificate)?;
        }
        n += 1;
    }
    Ok(out)
}

fn well_defined(rng: &mut impl Rng, opts: &EngineOptions, rec: &mut TrialRecord) -> Result<bool, FredholmError> {
    let a = gen::scalar_element(rng);
    rec.instance = Some(json!({ "a": describe(&a) }));
    let family = well_defined_family(&a, opts, WELL_DEFINED_PAIRS)?;
    let first = family[0].k_class.clone();
    let agree = family.iter().all(|m| m.k_class == first);
    let mut routes: Vec<&str> = family.iter().map(|m| m.route).collect();
    routes.sort_unstable();
    routes.dedup();
    rec.metric("pairs", family.len() as f64);
    rec.metric("routes", routes.len() as f64);
    rec.metric(
        "max_residual",
        family.iter().map(|m| m.cert.max_residual()).fold(0.0, f64::max),
    );
    rec.expected = index_oracle(&a, opts.margin).ok().map(|k| k.0);
    rec.observed = Some(first.0.clone());
    Ok(agree && family.len() >= WELL_DEFINED_PAIRS && rec.expected.as_ref() == Some(&first.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_round_trip() {
        for k in CampaignKind::ALL {
            assert_eq!(k.name().parse::<CampaignKind>().unwrap(), k);
        }
        assert!("nope".parse::<CampaignKind>().is_err());
    }

    #[test]
    fn trials_are_order_independent() {
        let opts = EngineOptions::default();
        let a = run_trial(CampaignKind::Oracle, 3, 11, &opts);
        let _ = run_trial(CampaignKind::Oracle, 0, 11, &opts);
        let b = run_trial(CampaignKind::Oracle, 3, 11, &opts);
        assert_eq!(a, b);
    }
}
