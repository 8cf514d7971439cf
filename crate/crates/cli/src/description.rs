//! JSON operator descriptions.
//!
//! Complex numbers are `[re, im]` pairs; matrices are arrays of rows.

use fredholm_core::algebra::{AlgebraError, Projection, ToeplitzElement};
use fredholm_core::laurent::{BaseRing, LaurentError, LaurentPoly, MAX_ROOT_DEGREE};
use fredholm_core::numkit::{ComplexMatrix, C64};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest allowed correction side, in coordinates.
pub const MAX_CORRECTION_SIDE: usize = 256;

pub type JsonMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Error)]
pub enum DescriptionError {
    #[error("invalid json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("degree {0} outside -{MAX_ROOT_DEGREE}..={MAX_ROOT_DEGREE}")]
    Degree(i64),
    #[error("degree {0} appears twice")]
    DuplicateDegree(i64),
    #[error("matrix is not rectangular")]
    Ragged,
    #[error("non-finite entry")]
    NotFinite,
    #[error("correction side {0} exceeds {MAX_CORRECTION_SIDE} coordinates")]
    TooLarge(usize),
    #[error(transparent)]
    Laurent(#[from] LaurentError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolTerm {
    pub degree: i64,
    pub coefficient: JsonMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionDescription {
    /// `true` means the projection is `1 - matrix`.
    #[serde(default)]
    pub cofinite: bool,
    pub matrix: JsonMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementParts {
    pub symbol: Vec<SymbolTerm>,
    #[serde(default)]
    pub correction: JsonMatrix,
}

/// Candidate certificate for the `direct` strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectInput {
    pub p: ProjectionDescription,
    pub q: ProjectionDescription,
    pub b: ElementParts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorDescription {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub ring: Vec<usize>,
    pub symbol: Vec<SymbolTerm>,
    #[serde(default)]
    pub correction: JsonMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direct: Option<DirectInput>,
}

pub fn matrix_to_json(m: &ComplexMatrix) -> JsonMatrix {
    (0..m.rows())
        .map(|i| m.row(i).iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

pub fn matrix_from_json(rows: &JsonMatrix) -> Result<ComplexMatrix, DescriptionError> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(DescriptionError::Ragged);
    }
    let mut out = ComplexMatrix::zeros(n, m);
    for (i, row) in rows.iter().enumerate() {
        for (j, &[re, im]) in row.iter().enumerate() {
            if !re.is_finite() || !im.is_finite() {
                return Err(DescriptionError::NotFinite);
            }
            out[(i, j)] = C64::new(re, im);
        }
    }
    Ok(out)
}

fn symbol_from_terms(ring: &BaseRing, terms: &[SymbolTerm]) -> Result<LaurentPoly, DescriptionError> {
    let mut degrees: Vec<i64> = Vec::with_capacity(terms.len());
    for t in terms {
        if t.degree.unsigned_abs() as usize > MAX_ROOT_DEGREE {
            return Err(DescriptionError::Degree(t.degree));
        }
        if degrees.contains(&t.degree) {
            return Err(DescriptionError::DuplicateDegree(t.degree));
        }
        degrees.push(t.degree);
    }
    let Some(&lo) = degrees.iter().min() else {
        return Ok(LaurentPoly::zero(ring.clone()));
    };
    let hi = *degrees.iter().max().expect("non-empty");
    let d = ring.dim();
    let mut coeffs = vec![ComplexMatrix::zeros(d, d); (hi - lo + 1) as usize];
    for t in terms {
        coeffs[(t.degree - lo) as usize] = matrix_from_json(&t.coefficient)?;
    }
    Ok(LaurentPoly::new(ring.clone(), lo, coeffs)?)
}

fn symbol_to_terms(symbol: &LaurentPoly) -> Vec<SymbolTerm> {
    symbol
        .coeffs()
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_zero())
        .map(|(k, c)| SymbolTerm {
            degree: symbol.lo() + k as i64,
            coefficient: matrix_to_json(c),
        })
        .collect()
}

fn element_from_parts(
    ring: &BaseRing,
    symbol: &[SymbolTerm],
    correction: &JsonMatrix,
) -> Result<ToeplitzElement, DescriptionError> {
    let symbol = symbol_from_terms(ring, symbol)?;
    let k = matrix_from_json(correction)?;
    let d = ring.dim();
    if k.rows() / d.max(1) > MAX_CORRECTION_SIDE {
        return Err(DescriptionError::TooLarge(k.rows() / d));
    }
    Ok(ToeplitzElement::new(symbol, k)?)
}

fn projection_from(ring: &BaseRing, p: &ProjectionDescription) -> Result<Projection, DescriptionError> {
    let m = matrix_from_json(&p.matrix)?;
    Ok(if p.cofinite {
        Projection::cofinite(ring.clone(), m)?
    } else {
        Projection::finite(ring.clone(), m)?
    })
}

/// Parsed direct-strategy input.
pub struct DirectCandidate {
    pub p: Projection,
    pub q: Projection,
    pub b: ToeplitzElement,
}

impl OperatorDescription {
    pub fn parse(text: &str) -> Result<Self, DescriptionError> {
        let desc: Self = serde_json::from_str(text)?;
        desc.element()?;
        Ok(desc)
    }

    pub fn read(path: &std::path::Path) -> Result<Self, DescriptionError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn base_ring(&self) -> Result<BaseRing, DescriptionError> {
        Ok(BaseRing::new(self.ring.clone())?)
    }

    pub fn element(&self) -> Result<ToeplitzElement, DescriptionError> {
        element_from_parts(&self.base_ring()?, &self.symbol, &self.correction)
    }

    pub fn direct_candidate(&self) -> Result<Option<DirectCandidate>, DescriptionError> {
        let Some(direct) = &self.direct else {
            return Ok(None);
        };
        let ring = self.base_ring()?;
        Ok(Some(DirectCandidate {
            p: projection_from(&ring, &direct.p)?,
            q: projection_from(&ring, &direct.q)?,
            b: element_from_parts(&ring, &direct.b.symbol, &direct.b.correction)?,
        }))
    }

    pub fn from_element(a: &ToeplitzElement, label: Option<String>) -> Self {
        Self {
            label,
            ring: a.ring().block_sizes().to_vec(),
            symbol: symbol_to_terms(a.symbol()),
            correction: matrix_to_json(a.correction()),
            direct: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("descriptions serialize")
    }
}

pub fn projection_to_json(p: &Projection) -> ProjectionDescription {
    ProjectionDescription {
        cofinite: !p.is_finite(),
        matrix: matrix_to_json(p.finite_part()),
    }
}

impl DirectInput {
    pub fn from_parts(p: &Projection, q: &Projection, b: &ToeplitzElement) -> Self {
        Self {
            p: projection_to_json(p),
            q: projection_to_json(q),
            b: ElementParts {
                symbol: symbol_to_terms(b.symbol()),
                correction: matrix_to_json(b.correction()),
            },
        }
    }
}
