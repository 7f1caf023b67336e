//! End-to-end pipelines: geometric analysis, invariance suites, Galerkin
//! spectrum and the exact lattice counting table.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dirac::{
    axial_torsion, coeff_a, coeff_b_action, coeff_b_torsion, coeff_b_torsion_inverted,
    torsion_spinor_identity_residual, WeylOperator,
};
use crate::error::{Cycle, Error, Result};
use crate::grid::Grid;
use crate::matrix_field::MatrixField;
use crate::problem::Problem;
use crate::random;
use crate::spectral::{
    assemble, asymptotic_compare, counting_function, eigensolve, half_integer_grid, metric_scale,
    midpoint_grid, weighted_reduce, AsymptoticReport, CountingSource, CountingTable, DiscreteSpectrum,
    Truncation,
};
use crate::spinor::{
    charge_conjugate, conformal_transform, extract_spinor, rigid_rotation, su2_reference_transform,
    GaugeData, SpinorField,
};
use crate::symbol::{
    conjugate_operator, conjugation_subprincipal_closed_form, ellipticity_check, metric_from_symbol,
    operator_from_symbol, subprincipal, topological_charge, Charge, Metric, Operator1st,
    PrincipalSymbol,
};
use crate::trig::TrigPoly;

const SAMPLE_NODES: usize = 8;
const TRIALS: usize = 3;
const CLOSED_FORM_TOL: f64 = 1e-10;
const PHI_AMPLITUDE: f64 = 0.3;

/// Metric, charge and reference for a validated problem.
pub struct Setup {
    pub grid: Grid,
    pub metric: Metric,
    pub charge: Charge,
    pub reference: PrincipalSymbol,
    pub weight: Vec<f64>,
}

pub fn setup(problem: &Problem) -> Result<Setup> {
    let grid = Grid::new(problem.grid);
    let metric = metric_from_symbol(&problem.symbol, &grid);
    if !ellipticity_check(&problem.symbol, problem.grid, problem.tolerances.ellipticity) {
        return Err(Error::NotElliptic {
            min_eigenvalue: metric.min_eigenvalue(),
        });
    }
    let charge = topological_charge(&problem.symbol, &grid)?;
    let reference = problem.reference_symbol(&metric, charge);
    let weight = problem.weight.sample_real(&grid);
    Ok(Setup {
        grid,
        metric,
        charge,
        reference,
        weight,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricSummary {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub max_deviation_from_identity: f64,
    pub min_sqrt_det: f64,
    pub max_sqrt_det: f64,
    /// Grid average of `g^{αβ}`.
    pub mean: [[f64; 3]; 3],
}

impl MetricSummary {
    fn new(metric: &Metric) -> Self {
        let n = metric.contravariant().len() as f64;
        let mut mean = [[0.0; 3]; 3];
        for g in metric.contravariant() {
            for (a, row) in mean.iter_mut().enumerate() {
                for (b, v) in row.iter_mut().enumerate() {
                    *v += g[(a, b)] / n;
                }
            }
        }
        let sd = metric.sqrt_det();
        Self {
            min_eigenvalue: metric.min_eigenvalue(),
            max_eigenvalue: metric.max_eigenvalue(),
            max_deviation_from_identity: metric.max_deviation_from_identity(),
            min_sqrt_det: sd.iter().copied().fold(f64::INFINITY, f64::min),
            max_sqrt_det: sd.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SpinVerdict {
    Compatible,
    SpinStructureMismatch { cycle: Cycle },
    ChargeMismatch,
}

impl SpinVerdict {
    pub fn is_compatible(&self) -> bool {
        matches!(self, SpinVerdict::Compatible)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpinorSample {
    pub node: [usize; 3],
    pub x: [f64; 3],
    /// `[[Re ξ¹, Im ξ¹], [Re ξ², Im ξ²]]`.
    pub xi: [[f64; 2]; 2],
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub name: Option<String>,
    pub grid: usize,
    pub metric: MetricSummary,
    pub charge: i32,
    pub spin_structure: SpinVerdict,
    pub lift_residual: Option<f64>,
    pub spinor_samples: Vec<SpinorSample>,
    pub action: Option<f64>,
    pub a: f64,
    pub b_action: Option<f64>,
    pub b_torsion: f64,
    /// Torsion route evaluated after `x ↦ −x` (charge −1 only).
    pub b_torsion_inverted: Option<f64>,
    pub torsion_min: f64,
    pub torsion_max: f64,
    pub torsion_identity_residual_max: Option<f64>,
}

impl AnalysisReport {
    /// Preferred value of `b`: the action route when a spinor exists.
    pub fn b(&self) -> f64 {
        self.b_action.unwrap_or(self.b_torsion)
    }
}

fn spinor_samples(xi: &SpinorField) -> Vec<SpinorSample> {
    let grid = xi.grid();
    let n = grid.n();
    (0..SAMPLE_NODES)
        .map(|j| {
            let node = [j * n / SAMPLE_NODES, (3 * j % SAMPLE_NODES) * n / SAMPLE_NODES, (5 * j % SAMPLE_NODES) * n / SAMPLE_NODES];
            let idx = grid.index(node);
            let [u, v] = xi.at(idx);
            SpinorSample {
                node,
                x: grid.point(idx),
                xi: [[u.re, u.im], [v.re, v.im]],
            }
        })
        .collect()
}

fn gauge(problem: &Problem, s: &Setup) -> Result<GaugeData> {
    extract_spinor(&problem.symbol, &s.reference, &s.weight, &s.metric)
}

fn verdict_of(result: Result<GaugeData>) -> Result<(SpinVerdict, Option<GaugeData>)> {
    match result {
        Ok(g) => Ok((SpinVerdict::Compatible, Some(g))),
        Err(Error::SpinStructureMismatch { cycle }) => Ok((SpinVerdict::SpinStructureMismatch { cycle }, None)),
        Err(Error::ChargeMismatch) => Ok((SpinVerdict::ChargeMismatch, None)),
        Err(e) => Err(e),
    }
}

/// Geometry, spinor and both coefficients. Spin-structure and charge
/// obstructions are recorded in the report rather than returned as errors.
pub fn analyze(problem: &Problem) -> Result<AnalysisReport> {
    let s = setup(problem)?;
    let (verdict, data) = verdict_of(gauge(problem, &s))?;
    let frame = crate::symbol::frame_from_symbol(&problem.symbol);
    let torsion = axial_torsion(&frame, &s.metric);
    let norm_only = SpinorField::new(
        &s.grid,
        [s.weight.iter().map(|w| Complex64::from(*w)).collect(), vec![Complex64::from(0.0); s.grid.len()]],
    );
    let a = coeff_a(&norm_only, &s.metric);
    let b_torsion = coeff_b_torsion(&s.weight, &frame, &s.metric, s.charge);
    let b_torsion_inverted = (s.charge == Charge::Negative)
        .then(|| coeff_b_torsion_inverted(&problem.symbol, &problem.weight, &s.grid, s.charge));

    let (mut action, mut b_action, mut identity, mut lift_residual, mut samples) = (None, None, None, None, vec![]);
    if let Some(d) = &data {
        let weyl = WeylOperator::new(&s.reference, &s.metric);
        action = Some(weyl.action(&d.spinor));
        b_action = Some(coeff_b_action(&d.spinor, &weyl));
        let res = torsion_spinor_identity_residual(&d.frame, &weyl, &d.spinor, s.charge);
        identity = Some(res.iter().fold(0.0f64, |m, r| m.max(r.abs())));
        lift_residual = Some(d.lift.lift_residual(&d.rotation));
        samples = spinor_samples(&d.spinor);
    }
    Ok(AnalysisReport {
        name: problem.name.clone(),
        grid: problem.grid,
        metric: MetricSummary::new(&s.metric),
        charge: s.charge.value(),
        spin_structure: verdict,
        lift_residual,
        spinor_samples: samples,
        action,
        a,
        b_action,
        b_torsion,
        b_torsion_inverted,
        torsion_min: torsion.min(),
        torsion_max: torsion.max(),
        torsion_identity_residual_max: identity,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Conformal,
    Su2,
    Rigid,
    ChargeConjugation,
    Torsion,
    Subprincipal,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Conformal,
        Suite::Su2,
        Suite::Rigid,
        Suite::ChargeConjugation,
        Suite::Torsion,
        Suite::Subprincipal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Conformal => "conformal",
            Suite::Su2 => "su2",
            Suite::Rigid => "rigid",
            Suite::ChargeConjugation => "charge_conjugation",
            Suite::Torsion => "torsion",
            Suite::Subprincipal => "subprincipal",
        }
    }

    /// Parses a suite name; `all` expands to every suite.
    pub fn parse(name: &str) -> Option<Vec<Suite>> {
        if name == "all" {
            return Some(Self::ALL.to_vec());
        }
        Self::ALL.iter().find(|s| s.name() == name).map(|s| vec![*s])
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(suite: Suite, name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Self {
            suite,
            name: name.into(),
            residual,
            tolerance,
            passed: residual <= tolerance,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub suites: Vec<Suite>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl VerifyReport {
    /// Check with the largest residual-to-tolerance ratio.
    pub fn worst(&self) -> Option<&Check> {
        self.checks
            .iter()
            .max_by(|a, b| (a.residual / a.tolerance).total_cmp(&(b.residual / b.tolerance)))
    }
}

struct Base<'a> {
    problem: &'a Problem,
    setup: Setup,
    data: GaugeData,
    weyl: WeylOperator,
}

impl<'a> Base<'a> {
    fn new(problem: &'a Problem) -> Result<Self> {
        let setup = setup(problem)?;
        let data = gauge(problem, &setup)?;
        let weyl = WeylOperator::new(&setup.reference, &setup.metric);
        Ok(Self {
            problem,
            setup,
            data,
            weyl,
        })
    }

    fn b_action(&self) -> f64 {
        coeff_b_action(&self.data.spinor, &self.weyl)
    }
}

fn suite_rng(seed: u64, suite: Suite) -> rand_chacha::ChaCha8Rng {
    random::rng(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (suite as u64 + 1))
}

fn conformal_checks(base: &Base, seed: u64) -> Result<Vec<Check>> {
    let p = base.problem;
    let s = &base.setup;
    let tol = p.tolerances.conformal_b;
    let b0 = base.b_action();
    let mut rng = suite_rng(seed, Suite::Conformal);
    let mut worst_action: f64 = 0.0;
    let mut worst_torsion: f64 = 0.0;
    for _ in 0..TRIALS {
        let phi = random::real_poly(&mut rng, 2, 3, PHI_AMPLITUDE);
        let (sym, w) = conformal_transform(&p.symbol, &p.weight, &phi, &s.grid);
        let (reference, _) = conformal_transform(&s.reference, &p.weight, &phi, &s.grid);
        let metric = metric_from_symbol(&sym, &s.grid);
        let wv = w.sample_real(&s.grid);
        let d = extract_spinor(&sym, &reference, &wv, &metric)?;
        let b = coeff_b_action(&d.spinor, &WeylOperator::new(&reference, &metric));
        worst_action = worst_action.max((b - b0).abs());
        let bt = coeff_b_torsion(&wv, &d.frame, &metric, s.charge);
        worst_torsion = worst_torsion.max((bt - b0).abs());
    }
    Ok(vec![
        Check::new(Suite::Conformal, "b_action_drift", worst_action, tol),
        Check::new(Suite::Conformal, "b_torsion_drift", worst_torsion, tol),
    ])
}

fn su2_checks(base: &Base, seed: u64) -> Result<Vec<Check>> {
    let p = base.problem;
    let s = &base.setup;
    let s0 = base.weyl.action(&base.data.spinor);
    let mut rng = suite_rng(seed, Suite::Su2);
    let mut worst: f64 = 0.0;
    for _ in 0..TRIALS {
        let q = random::su2_field(&mut rng, 1);
        let reference = su2_reference_transform(&s.reference, &q);
        let d = extract_spinor(&p.symbol, &reference, &s.weight, &s.metric)?;
        let s1 = WeylOperator::new(&reference, &s.metric).action(&d.spinor);
        worst = worst.max((s1 - s0).abs());
    }
    Ok(vec![Check::new(Suite::Su2, "action_drift", worst, p.tolerances.su2_action)])
}

fn rigid_checks(base: &Base, seed: u64) -> Vec<Check> {
    let d0 = base.weyl.density(&base.data.spinor);
    let mut rng = suite_rng(seed, Suite::Rigid);
    let mut worst: f64 = 0.0;
    for _ in 0..TRIALS {
        let q = random::su2(&mut rng);
        let d1 = base.weyl.density(&rigid_rotation(&base.data.spinor, &q));
        worst = d0.iter().zip(&d1).fold(worst, |m, (x, y)| m.max((x - y).abs()));
    }
    vec![Check::new(Suite::Rigid, "density_drift", worst, base.problem.tolerances.rigid_density)]
}

fn charge_conjugation_checks(base: &Base) -> Vec<Check> {
    let s0 = base.weyl.action(&base.data.spinor);
    let s1 = base.weyl.action(&charge_conjugate(&base.data.spinor));
    vec![Check::new(
        Suite::ChargeConjugation,
        "action_difference",
        (s1 - s0).abs(),
        base.problem.tolerances.charge_conjugation,
    )]
}

fn torsion_checks(base: &Base) -> Vec<Check> {
    let p = base.problem;
    let s = &base.setup;
    let res = torsion_spinor_identity_residual(&base.data.frame, &base.weyl, &base.data.spinor, s.charge);
    let identity = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let ba = base.b_action();
    let bt = coeff_b_torsion(&s.weight, &base.data.frame, &s.metric, s.charge);
    let mut out = vec![
        Check::new(Suite::Torsion, "identity_residual", identity, p.tolerances.torsion_identity),
        Check::new(Suite::Torsion, "route_difference", (ba - bt).abs(), p.tolerances.route_equality),
    ];
    if s.charge == Charge::Negative {
        let bi = coeff_b_torsion_inverted(&p.symbol, &p.weight, &s.grid, s.charge);
        out.push(Check::new(
            Suite::Torsion,
            "inverted_route_difference",
            (ba - bi).abs(),
            p.tolerances.route_equality,
        ));
    }
    out
}

fn subprincipal_checks(problem: &Problem, reference: &PrincipalSymbol, seed: u64) -> Vec<Check> {
    let op = problem_operator(problem);
    let sub = subprincipal(&op).max_coefficient_diff(&MatrixField::zero());
    let mut rng = suite_rng(seed, Suite::Subprincipal);
    let base = operator_from_symbol(reference);
    let mut worst: f64 = 0.0;
    for _ in 0..TRIALS {
        let r = random::su2_field(&mut rng, 1);
        let lhs = subprincipal(&conjugate_operator(&base, &r));
        worst = worst.max(lhs.max_coefficient_diff(&conjugation_subprincipal_closed_form(reference, &r)));
    }
    vec![
        Check::new(Suite::Subprincipal, "operator_subprincipal", sub, problem.tolerances.subprincipal),
        Check::new(Suite::Subprincipal, "conjugation_closed_form", worst, CLOSED_FORM_TOL),
    ]
}

/// Runs the requested suites with gauge data drawn from `seed`.
pub fn verify(problem: &Problem, suites: &[Suite], seed: u64) -> Result<VerifyReport> {
    let needs_spinor = suites.iter().any(|s| *s != Suite::Subprincipal);
    let base = if needs_spinor { Some(Base::new(problem)?) } else { None };
    let mut checks = Vec::new();
    for &suite in suites {
        match suite {
            Suite::Subprincipal => {
                let reference = match &base {
                    Some(b) => b.setup.reference.clone(),
                    None => {
                        let s = setup(problem)?;
                        s.reference
                    }
                };
                checks.extend(subprincipal_checks(problem, &reference, seed));
            }
            other => {
                let b = base.as_ref().expect("spinor data");
                match other {
                    Suite::Conformal => checks.extend(conformal_checks(b, seed)?),
                    Suite::Su2 => checks.extend(su2_checks(b, seed)?),
                    Suite::Rigid => checks.extend(rigid_checks(b, seed)),
                    Suite::ChargeConjugation => checks.extend(charge_conjugation_checks(b)),
                    Suite::Torsion => checks.extend(torsion_checks(b)),
                    Suite::Subprincipal => unreachable!(),
                }
            }
        }
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport {
        seed,
        suites: suites.to_vec(),
        checks,
        passed,
    })
}

/// Operator with the problem's principal symbol plus any extra zero-order
/// term.
pub fn problem_operator(problem: &Problem) -> Operator1st {
    operator_from_symbol(&problem.symbol).add_zero_order(&problem.subprincipal)
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumReport {
    pub spectrum: DiscreteSpectrum,
    /// Sup-norm bound on the part of `1/w` dropped by the reduction.
    pub weight_truncation_bound: f64,
    pub counting: CountingTable,
    pub asymptotic: AsymptoticReport,
}

/// Galerkin spectrum of `Lv = λwv` at truncation `m`, its counting function
/// at midpoints below `lambda_max`, and the comparison against `a λ³ + b λ²`.
pub fn spectrum(problem: &Problem, m: usize, lambda_max: f64, a: f64, b: f64) -> Result<SpectrumReport> {
    let truncation = Truncation::new(m);
    let op = problem_operator(problem);
    let (op, bound) = if problem.weight == TrigPoly::constant(1.0) {
        (op, 0.0)
    } else {
        let max_degree = (2 * m as i32 - op.degree()).max(0);
        let reduced = weighted_reduce(&op, &problem.weight, max_degree)?;
        (reduced.operator, reduced.truncation_bound)
    };
    let matrix = assemble(&op, truncation)?;
    let gamma = metric_scale(&op, &Grid::new(problem.grid));
    let spectrum = eigensolve(&matrix, gamma)?;
    let top = lambda_max.min(spectrum.trust_radius);
    let counting = counting_function(&CountingSource::Galerkin(&spectrum), &midpoint_grid(&spectrum, lambda_max));
    let asymptotic = asymptotic_compare(&counting, a, b, (0.8 * top, top), (0.2 * top, top));
    Ok(SpectrumReport {
        spectrum,
        weight_truncation_bound: bound,
        counting,
        asymptotic,
    })
}

/// Exact counting table of the twisted example at half-integers.
pub fn exact_count(lambda_max: f64, a: f64, b: f64) -> (CountingTable, AsymptoticReport) {
    let table = counting_function(&CountingSource::ExactExample, &half_integer_grid(lambda_max));
    let window = ((0.8 * lambda_max).max(0.0), lambda_max);
    let fit = ((0.2 * lambda_max).max(0.0), lambda_max);
    let report = asymptotic_compare(&table, a, b, window, fit);
    (table, report)
}

pub fn example_a() -> f64 {
    4.0 * PI / 3.0
}

pub fn example_b() -> f64 {
    -4.0 * PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::problem::{NamedReference, ProblemSpec, ReferenceSpec};

    fn problem(sym: &PrincipalSymbol) -> Problem {
        ProblemSpec::from_symbol(sym).validate().unwrap()
    }

    #[test]
    fn example_report() {
        let r = analyze(&problem(&catalog::example_symbol())).unwrap();
        assert_eq!(r.charge, 1);
        assert!(r.spin_structure.is_compatible());
        assert!(r.metric.max_deviation_from_identity < 1e-12);
        let vol = 8.0 * PI.powi(3);
        assert!((r.action.unwrap() + vol).abs() < 1e-9 * vol);
        assert!((r.a - example_a()).abs() < 1e-9 * example_a());
        assert!((r.b_action.unwrap() - example_b()).abs() < 1e-9 * 4.0 * PI);
        assert!((r.b_torsion - example_b()).abs() < 1e-9 * 4.0 * PI);
        assert!(r.torsion_identity_residual_max.unwrap() < 1e-9);
        assert_eq!(r.spinor_samples.len(), SAMPLE_NODES);
    }

    #[test]
    fn standard_pauli_has_no_second_coefficient() {
        let r = analyze(&problem(&PrincipalSymbol::standard_pauli())).unwrap();
        assert!((r.a - example_a()).abs() < 1e-12);
        assert!(r.b().abs() < 1e-12);
    }

    #[test]
    fn single_turn_reports_the_obstruction() {
        let r = analyze(&problem(&catalog::twisted_symbol(1, false))).unwrap();
        assert_eq!(r.spin_structure, SpinVerdict::SpinStructureMismatch { cycle: Cycle::X3 });
        assert!(r.action.is_none());
        assert!((r.b_torsion - example_b() / 2.0).abs() < 1e-9);
    }

    #[test]
    fn flipped_needs_a_flipped_reference() {
        let spec = ProblemSpec::from_symbol(&catalog::twisted_symbol(2, true));
        let r = analyze(&spec.clone().validate().unwrap()).unwrap();
        assert_eq!(r.spin_structure, SpinVerdict::ChargeMismatch);
        let p = spec
            .with_reference(ReferenceSpec::Named(NamedReference::FlippedPauli))
            .validate()
            .unwrap();
        let r = analyze(&p).unwrap();
        assert_eq!(r.charge, -1);
        assert!((r.b() - example_b()).abs() < 1e-9);
        assert!((r.b_torsion_inverted.unwrap() - example_b()).abs() < 1e-9);
    }

    #[test]
    fn example_passes_every_suite() {
        let r = verify(&problem(&catalog::example_symbol()), &Suite::ALL, 42).unwrap();
        for c in &r.checks {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn planted_subprincipal_is_caught() {
        let p = ProblemSpec::from_symbol(&catalog::example_symbol())
            .with_subprincipal(&MatrixField::identity())
            .validate()
            .unwrap();
        let r = verify(&p, &[Suite::Subprincipal], 42).unwrap();
        assert!(!r.passed);
        assert_eq!(r.worst().unwrap().name, "operator_subprincipal");
    }

    #[test]
    fn exact_table_head() {
        let (t, _) = exact_count(2.6, example_a(), example_b());
        let rows: Vec<(f64, u64)> = t.samples.iter().map(|s| (s.lambda, s.count)).collect();
        assert_eq!(rows, vec![(0.5, 0), (1.5, 2), (2.5, 20)]);
    }

    #[test]
    fn constant_weight_scales_the_spectrum() {
        let sym = catalog::example_symbol();
        let one = spectrum(&problem(&sym), 2, 3.0, 0.0, 0.0).unwrap();
        let p4 = ProblemSpec::from_symbol(&sym).with_weight(&TrigPoly::constant(4.0)).validate().unwrap();
        let four = spectrum(&p4, 2, 3.0, 0.0, 0.0).unwrap();
        for (x, y) in one.spectrum.eigenvalues.iter().zip(&four.spectrum.eigenvalues) {
            assert!((x / 4.0 - y).abs() < 1e-12);
        }
    }
}
