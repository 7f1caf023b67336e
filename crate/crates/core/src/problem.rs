//! JSON problem description: symbol, reference, weight, discretization and
//! tolerance overrides.
//!
//! Matrix coefficients are written as `{"k": [k1, k2, k3], "re": [[..]], "im": [[..]]}`.
//! Only one member of each `±k` pair needs to be given; the partner follows
//! from pointwise Hermiticity (`Â_{−k} = Â_k*`). Weight coefficients follow
//! the same rule with `ŵ_{−k} = conj ŵ_k`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::catalog;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::matrix_field::{Mat2, MatrixField};
use crate::symbol::PrincipalSymbol;
use crate::tolerances;
use crate::trig::{Freq, TrigPoly};

const CLOSURE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixCoefficient {
    pub k: Freq,
    pub re: [[f64; 2]; 2],
    #[serde(default)]
    pub im: [[f64; 2]; 2],
}

impl MatrixCoefficient {
    fn value(&self) -> Mat2 {
        Mat2::from_fn(|r, c| Complex64::new(self.re[r][c], self.im[r][c]))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarCoefficient {
    pub k: Freq,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedReference {
    /// Constant `s^α`.
    #[default]
    StandardPauli,
    /// Constant `s¹, −s², s³`.
    FlippedPauli,
    /// Symmetric square root of the symbol's own metric.
    MetricSqrt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReferenceSpec {
    Named(NamedReference),
    Coefficients([Vec<MatrixCoefficient>; 3]),
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        ReferenceSpec::Named(NamedReference::StandardPauli)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ellipticity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conformal_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub su2_action: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rigid_density: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charge_conjugation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torsion_identity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route_equality: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subprincipal: Option<f64>,
}

/// Effective tolerances after overrides.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub ellipticity: f64,
    pub conformal_b: f64,
    pub su2_action: f64,
    pub rigid_density: f64,
    pub charge_conjugation: f64,
    pub torsion_identity: f64,
    pub route_equality: f64,
    pub subprincipal: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ellipticity: tolerances::ELLIPTICITY,
            conformal_b: 1e-6,
            su2_action: 1e-7,
            rigid_density: 1e-9,
            charge_conjugation: 1e-9,
            torsion_identity: 1e-6,
            route_equality: 1e-7,
            subprincipal: 1e-12,
        }
    }
}

impl ToleranceOverrides {
    pub fn resolve(&self) -> Tolerances {
        let d = Tolerances::default();
        Tolerances {
            ellipticity: self.ellipticity.unwrap_or(d.ellipticity),
            conformal_b: self.conformal_b.unwrap_or(d.conformal_b),
            su2_action: self.su2_action.unwrap_or(d.su2_action),
            rigid_density: self.rigid_density.unwrap_or(d.rigid_density),
            charge_conjugation: self.charge_conjugation.unwrap_or(d.charge_conjugation),
            torsion_identity: self.torsion_identity.unwrap_or(d.torsion_identity),
            route_equality: self.route_equality.unwrap_or(d.route_equality),
            subprincipal: self.subprincipal.unwrap_or(d.subprincipal),
        }
    }
}

fn default_truncation() -> usize {
    4
}

fn default_grid() -> usize {
    tolerances::DEFAULT_GRID
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub symbol: [Vec<MatrixCoefficient>; 3],
    #[serde(default)]
    pub reference_symbol: ReferenceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<Vec<ScalarCoefficient>>,
    /// Extra zero-order term added to the operator, equal to its subprincipal
    /// symbol.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subprincipal: Option<Vec<MatrixCoefficient>>,
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
}

/// Validated, closed problem data.
#[derive(Clone, Debug)]
pub struct Problem {
    pub name: Option<String>,
    pub symbol: PrincipalSymbol,
    pub reference: NamedOrExplicit,
    pub weight: TrigPoly,
    pub subprincipal: MatrixField,
    pub truncation: usize,
    pub grid: usize,
    pub tolerances: Tolerances,
}

#[derive(Clone, Debug)]
pub enum NamedOrExplicit {
    Named(NamedReference),
    Explicit(PrincipalSymbol),
}

fn close_matrix(list: &[MatrixCoefficient], what: &str) -> Result<MatrixField> {
    let mut map: BTreeMap<Freq, Mat2> = BTreeMap::new();
    for c in list {
        if c.re.iter().flatten().chain(c.im.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("{what}: non-finite entry at k = {:?}", c.k)));
        }
        let v = c.value();
        let neg = c.k.map(|x| -x);
        if let Some(prev) = map.get(&c.k) {
            if crate::matrix_field::max_abs(&(prev - v)) > CLOSURE_TOL {
                return Err(Error::Validation(format!("{what}: conflicting entries for k = {:?}", c.k)));
            }
            continue;
        }
        if c.k == neg {
            if crate::matrix_field::max_abs(&(v - v.adjoint())) > CLOSURE_TOL {
                return Err(Error::Validation(format!("{what}: k = 0 coefficient is not Hermitian")));
            }
            map.insert(c.k, v);
            continue;
        }
        if let Some(partner) = map.get(&neg) {
            if crate::matrix_field::max_abs(&(partner - v.adjoint())) > CLOSURE_TOL {
                return Err(Error::Validation(format!(
                    "{what}: coefficients at k = {:?} and −k violate Hermitian closure",
                    c.k
                )));
            }
            continue;
        }
        map.insert(c.k, v);
        map.insert(neg, v.adjoint());
    }
    let entry = |r: usize, c: usize| TrigPoly::from_terms(map.iter().map(|(k, m)| (*k, m[(r, c)])));
    Ok(MatrixField::new([[entry(0, 0), entry(0, 1)], [entry(1, 0), entry(1, 1)]]))
}

fn close_scalar(list: &[ScalarCoefficient]) -> Result<TrigPoly> {
    let mut map: BTreeMap<Freq, Complex64> = BTreeMap::new();
    for c in list {
        if !c.re.is_finite() || !c.im.is_finite() {
            return Err(Error::Validation(format!("weight: non-finite entry at k = {:?}", c.k)));
        }
        let v = Complex64::new(c.re, c.im);
        let neg = c.k.map(|x| -x);
        if let Some(prev) = map.get(&c.k) {
            if (prev - v).norm() > CLOSURE_TOL {
                return Err(Error::Validation(format!("weight: conflicting entries for k = {:?}", c.k)));
            }
            continue;
        }
        if c.k == neg {
            if v.im.abs() > CLOSURE_TOL {
                return Err(Error::Validation("weight: k = 0 coefficient must be real".into()));
            }
            map.insert(c.k, Complex64::from(v.re));
            continue;
        }
        if let Some(partner) = map.get(&neg) {
            if (partner - v.conj()).norm() > CLOSURE_TOL {
                return Err(Error::Validation(format!("weight: k = {:?} and −k are not conjugate", c.k)));
            }
            continue;
        }
        map.insert(c.k, v);
        map.insert(neg, v.conj());
    }
    Ok(TrigPoly::from_terms(map))
}

fn close_symbol(list: &[Vec<MatrixCoefficient>; 3], what: &str) -> Result<PrincipalSymbol> {
    let comps = [0, 1, 2]
        .map(|a| close_matrix(&list[a], &format!("{what} L^({})", a + 1)))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let [a, b, c]: [MatrixField; 3] = comps.try_into().expect("three components");
    PrincipalSymbol::new([a, b, c])
}

/// One coefficient per `±k` pair (the lexicographically larger member).
fn matrix_coefficients(field: &MatrixField) -> Vec<MatrixCoefficient> {
    let keys: std::collections::BTreeSet<Freq> = field
        .entries()
        .iter()
        .flatten()
        .flat_map(|p| p.terms().map(|(k, _)| *k))
        .filter(|k| *k >= k.map(|x| -x))
        .collect();
    keys.into_iter()
        .map(|k| {
            let m = Mat2::from_fn(|r, c| field.entry(r, c).coefficient(k));
            MatrixCoefficient {
                k,
                re: [[m[(0, 0)].re, m[(0, 1)].re], [m[(1, 0)].re, m[(1, 1)].re]],
                im: [[m[(0, 0)].im, m[(0, 1)].im], [m[(1, 0)].im, m[(1, 1)].im]],
            }
        })
        .collect()
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Validation(format!("malformed problem: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem serializes")
    }

    /// Spec for a symbol with the standard reference and unit weight.
    pub fn from_symbol(symbol: &PrincipalSymbol) -> Self {
        Self {
            name: None,
            symbol: [0, 1, 2].map(|a| matrix_coefficients(symbol.component(a))),
            reference_symbol: ReferenceSpec::default(),
            weight: None,
            subprincipal: None,
            truncation: default_truncation(),
            grid: default_grid(),
            tolerances: ToleranceOverrides::default(),
        }
    }

    pub fn with_weight(mut self, w: &TrigPoly) -> Self {
        let list = w
            .terms()
            .filter(|(k, _)| **k >= k.map(|x| -x))
            .map(|(k, c)| ScalarCoefficient { k: *k, re: c.re, im: c.im })
            .collect();
        self.weight = Some(list);
        self
    }

    pub fn with_reference(mut self, reference: ReferenceSpec) -> Self {
        self.reference_symbol = reference;
        self
    }

    pub fn with_subprincipal(mut self, extra: &MatrixField) -> Self {
        self.subprincipal = Some(matrix_coefficients(extra));
        self
    }

    pub fn explicit_reference(symbol: &PrincipalSymbol) -> ReferenceSpec {
        ReferenceSpec::Coefficients([0, 1, 2].map(|a| matrix_coefficients(symbol.component(a))))
    }

    /// Hermitian closure, well-formedness and positivity checks.
    pub fn validate(&self) -> Result<Problem> {
        if self.grid < 4 {
            return Err(Error::Validation(format!("grid {} is too small", self.grid)));
        }
        let symbol = close_symbol(&self.symbol, "symbol")?;
        if self.grid < 2 * symbol.degree() as usize + 1 {
            return Err(Error::Validation(format!(
                "grid {} cannot resolve symbol degree {}",
                self.grid,
                symbol.degree()
            )));
        }
        let reference = match &self.reference_symbol {
            ReferenceSpec::Named(n) => NamedOrExplicit::Named(*n),
            ReferenceSpec::Coefficients(list) => NamedOrExplicit::Explicit(close_symbol(list, "reference")?),
        };
        let weight = match &self.weight {
            None => TrigPoly::constant(1.0),
            Some(list) => close_scalar(list)?,
        };
        let min_w = weight.sample_real(&Grid::new(self.grid)).into_iter().fold(f64::INFINITY, f64::min);
        if !(min_w > 0.0) {
            return Err(Error::Validation(format!("weight is not positive on the grid (min {min_w:.3e})")));
        }
        let subprincipal = match &self.subprincipal {
            None => MatrixField::zero(),
            Some(list) => close_matrix(list, "subprincipal")?,
        };
        Ok(Problem {
            name: self.name.clone(),
            symbol,
            reference,
            weight,
            subprincipal,
            truncation: self.truncation,
            grid: self.grid,
            tolerances: self.tolerances.resolve(),
        })
    }
}

impl Problem {
    /// Reference symbol; the metric-root choice depends on the charge.
    pub fn reference_symbol(&self, metric: &crate::symbol::Metric, charge: crate::symbol::Charge) -> PrincipalSymbol {
        match &self.reference {
            NamedOrExplicit::Named(NamedReference::StandardPauli) => catalog::pauli_reference(false),
            NamedOrExplicit::Named(NamedReference::FlippedPauli) => catalog::pauli_reference(true),
            NamedOrExplicit::Named(NamedReference::MetricSqrt) => crate::symbol::reference_from_metric(metric, charge),
            NamedOrExplicit::Explicit(s) => s.clone(),
        }
    }
}
