//! Cross-module property suites over randomized symbols, weights and gauges.

use num_complex::Complex64;
use proptest::prelude::*;

use crate::analysis::{self, analyze, Suite};
use crate::catalog;
use crate::dirac::{coeff_b_action, WeylOperator};
use crate::grid::Grid;
use crate::matrix_field::{max_abs, Mat2, MatrixField};
use crate::problem::{NamedReference, Problem, ProblemSpec, ReferenceSpec};
use crate::random;
use crate::spectral::{
    assemble, counting_function, eigensolve, exact_example_spectrum, lattice_count, CountingSource, Truncation,
};
use crate::spinor::{
    conformal_transform, extract_spinor, rotation_of, so3_to_su2_lift, spinor_from_su2, su2_from_spinor, SO3Field,
    SU2Field,
};
use crate::symbol::{
    conjugate_operator, conjugation_subprincipal_closed_form, frame_from_symbol, metric_from_symbol,
    operator_from_symbol, subprincipal, symbol_from_frame, topological_charge, Charge,
};
use crate::trig::TrigPoly;

const GRID: usize = 48;

fn problem(seed: u64) -> Problem {
    let mut rng = random::rng(seed);
    let sym = random::symbol(&mut rng, 2, 0.2);
    let w = random::weight(&mut rng, 2, 0.4);
    let mut spec = ProblemSpec::from_symbol(&sym)
        .with_weight(&w)
        .with_reference(ReferenceSpec::Named(NamedReference::MetricSqrt));
    spec.grid = GRID;
    spec.validate().unwrap()
}

fn light() -> ProptestConfig {
    ProptestConfig::with_cases(24)
}

fn heavy() -> ProptestConfig {
    ProptestConfig::with_cases(3)
}

proptest! {
    #![proptest_config(light())]

    #[test]
    fn symbol_squares_to_the_metric(seed in any::<u64>(), p in prop::array::uniform3(-2.0f64..2.0), node in 0usize..512) {
        let sym = random::symbol(&mut random::rng(seed), 2, 0.3);
        let g = Grid::new(8);
        let metric = metric_from_symbol(&sym, &g);
        let x = g.point(node);
        let l = sym.evaluate(x, p);
        let gm = metric.contravariant()[node];
        let q: f64 = (0..3).flat_map(|a| (0..3).map(move |b| (a, b))).map(|(a, b)| gm[(a, b)] * p[a] * p[b]).sum();
        prop_assert!(max_abs(&(l * l - Mat2::identity() * Complex64::from(q))) < 1e-12);
        prop_assert!(max_abs(&(l - l.adjoint())) < 1e-14);
    }

    #[test]
    fn frame_round_trip(seed in any::<u64>()) {
        let sym = random::symbol(&mut random::rng(seed), 2, 0.3);
        let back = symbol_from_frame(&frame_from_symbol(&sym));
        prop_assert!(back.max_coefficient_diff(&sym) < 1e-15);
    }

    #[test]
    fn charge_flips_under_inversion(seed in any::<u64>()) {
        let sym = random::symbol(&mut random::rng(seed), 2, 0.3);
        let g = Grid::new(12);
        prop_assert_eq!(topological_charge(&sym, &g).unwrap(), Charge::Positive);
        prop_assert_eq!(topological_charge(&sym.invert_coordinates(), &g).unwrap(), Charge::Negative);
    }

    #[test]
    fn constructed_operators_have_no_subprincipal(seed in any::<u64>()) {
        let sym = random::symbol(&mut random::rng(seed), 2, 0.3);
        let sub = subprincipal(&operator_from_symbol(&sym));
        prop_assert!(sub.max_coefficient_diff(&MatrixField::zero()) < 1e-12);
    }

    #[test]
    fn conjugation_matches_closed_form(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let reference = random::symbol(&mut rng, 1, 0.3);
        let r = random::su2_field(&mut rng, 2);
        let lhs = subprincipal(&conjugate_operator(&operator_from_symbol(&reference), &r));
        prop_assert!(lhs.max_coefficient_diff(&conjugation_subprincipal_closed_form(&reference, &r)) < 1e-12);
    }

    #[test]
    fn smooth_su2_fields_lift_to_themselves(seed in any::<u64>()) {
        let q = random::su2_field(&mut random::rng(seed), 2);
        let g = Grid::new(16);
        let values = q.sample(&g);
        let o = SO3Field::new(&g, values.iter().map(rotation_of).collect());
        let lift = so3_to_su2_lift(&o).unwrap();
        prop_assert!(lift.max_deviation_up_to_sign(&values) < 1e-12);
    }

    #[test]
    fn spinor_and_su2_round_trip(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let g = Grid::new(8);
        let q = SU2Field::from_field(&g, &random::su2_field(&mut rng, 2));
        let w = random::weight(&mut rng, 2, 0.4).sample_real(&g);
        let (r, w2) = su2_from_spinor(&spinor_from_su2(&q, &w)).unwrap();
        prop_assert!(r.max_deviation_up_to_sign(q.values()) < 1e-13);
        prop_assert!(w.iter().zip(&w2).all(|(a, b)| (a - b).abs() < 1e-13));
    }

    #[test]
    fn problem_spec_round_trip(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let sym = random::symbol(&mut rng, 2, 0.3);
        let w = random::weight(&mut rng, 2, 0.4);
        let spec = ProblemSpec::from_symbol(&sym).with_weight(&w);
        let back = ProblemSpec::from_json(&spec.to_json()).unwrap();
        prop_assert_eq!(&back, &spec);
        let p = back.validate().unwrap();
        prop_assert!(p.symbol.max_coefficient_diff(&sym) < 1e-15);
        prop_assert!(p.weight.max_coefficient_diff(&w) < 1e-15);
    }

    #[test]
    fn assembled_matrices_are_hermitian(seed in any::<u64>()) {
        let sym = random::symbol(&mut random::rng(seed), 2, 0.3);
        let a = assemble(&operator_from_symbol(&sym), Truncation::new(2)).unwrap();
        prop_assert!(a.hermiticity_residual() < 1e-15);
    }

    #[test]
    fn exact_counting_matches_brute_force(lambda in 0.05f64..9.0) {
        prop_assume!((lambda - lambda.round()).abs() > 1e-6);
        let table = counting_function(&CountingSource::ExactExample, &[lambda]);
        let brute = exact_example_spectrum(lambda + 1.0).into_iter().filter(|l| *l > 0.0 && *l < lambda).count();
        prop_assert_eq!(table.samples[0].count, brute as u64);
    }

    #[test]
    fn lattice_count_is_monotone(r in 0.0f64..12.0, dr in 0.0f64..1.0) {
        prop_assert!(lattice_count(r) <= lattice_count(r + dr));
    }
}

proptest! {
    #![proptest_config(heavy())]

    #[test]
    fn routes_agree_and_identity_holds(seed in any::<u64>()) {
        let r = analyze(&problem(seed)).unwrap();
        prop_assert!((r.b_action.unwrap() - r.b_torsion).abs() < 1e-7);
        prop_assert!(r.torsion_identity_residual_max.unwrap() < 1e-6);
    }

    #[test]
    fn conformal_chain_at_48(seed in any::<u64>()) {
        let p = problem(seed);
        let s = analysis::setup(&p).unwrap();
        let before = extract_spinor(&p.symbol, &s.reference, &s.weight, &s.metric).unwrap();
        let b0 = coeff_b_action(&before.spinor, &WeylOperator::new(&s.reference, &s.metric));
        let mut rng = random::rng(seed ^ 0x5eed);
        let mut sym = p.symbol.clone();
        let mut reference = s.reference.clone();
        let mut w = p.weight.clone();
        for _ in 0..2 {
            let phi = random::real_poly(&mut rng, 2, 3, 0.15);
            let (s2, w2) = conformal_transform(&sym, &w, &phi, &s.grid);
            let (r2, _) = conformal_transform(&reference, &w, &phi, &s.grid);
            sym = s2;
            reference = r2;
            w = w2;
        }
        let metric = metric_from_symbol(&sym, &s.grid);
        let after = extract_spinor(&sym, &reference, &w.sample_real(&s.grid), &metric).unwrap();
        let b1 = coeff_b_action(&after.spinor, &WeylOperator::new(&reference, &metric));
        prop_assert!((b1 - b0).abs() < 1e-6, "{b0} {b1}");
    }

    #[test]
    fn random_problems_pass_the_suites(seed in any::<u64>()) {
        let r = analysis::verify(&problem(seed), &Suite::ALL, seed).unwrap();
        for c in &r.checks {
            prop_assert!(c.passed, "{:?}", c);
        }
    }

    #[test]
    fn constant_weight_divides_the_spectrum(c in 0.25f64..4.0) {
        let sym = catalog::example_symbol();
        let base = ProblemSpec::from_symbol(&sym).validate().unwrap();
        let scaled = ProblemSpec::from_symbol(&sym).with_weight(&TrigPoly::constant(c)).validate().unwrap();
        let a = analysis::spectrum(&base, 2, 2.0, 0.0, 0.0).unwrap();
        let b = analysis::spectrum(&scaled, 2, 2.0, 0.0, 0.0).unwrap();
        for (x, y) in a.spectrum.eigenvalues.iter().zip(&b.spectrum.eigenvalues) {
            prop_assert!((x / c - y).abs() < 1e-12);
        }
    }
}

#[test]
fn galerkin_converges_inside_the_trust_window() {
    let sym = random::symbol(&mut random::rng(11), 1, 0.2);
    let op = operator_from_symbol(&sym);
    let gamma = crate::spectral::metric_scale(&op, &Grid::new(16));
    let lo = eigensolve(&assemble(&op, Truncation::new(4)).unwrap(), gamma).unwrap();
    let hi = eigensolve(&assemble(&op, Truncation::new(6)).unwrap(), gamma).unwrap();
    let window = 0.5 * lo.trust_radius;
    let near: Vec<f64> = lo.eigenvalues.iter().copied().filter(|l| l.abs() < window).collect();
    for l in &near {
        let d = hi.eigenvalues.iter().map(|h| (h - l).abs()).fold(f64::INFINITY, f64::min);
        assert!(d < 1e-6, "{l} moved by {d}");
    }
    assert!(!near.is_empty());
}

#[test]
fn weighted_reduction_matches_generalized_problem() {
    let sym = catalog::example_symbol();
    let w = TrigPoly::constant(1.0) + TrigPoly::cos_sin([1, 0, 0], 0.2, 0.0);
    let p = ProblemSpec::from_symbol(&sym).with_weight(&w).validate().unwrap();
    let reduced = analysis::spectrum(&p, 6, 2.0, 0.0, 0.0).unwrap();
    let t = Truncation::new(6);
    let a = assemble(&operator_from_symbol(&sym), t).unwrap();
    let b = crate::spectral::mass_matrix(&w, t).unwrap();
    let general = crate::spectral::generalized_eigenvalues(&a, &b).unwrap();
    let window = 0.25 * reduced.spectrum.trust_radius;
    let mut worst: f64 = 0.0;
    for l in reduced.spectrum.eigenvalues.iter().filter(|l| l.abs() < window) {
        let d = general.iter().map(|g| (g - l).abs()).fold(f64::INFINITY, f64::min);
        worst = worst.max(d);
    }
    assert!(worst < 1e-2, "{worst}");
}
