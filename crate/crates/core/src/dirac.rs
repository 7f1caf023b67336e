//! Christoffel symbols, the massless Dirac (Weyl) operator, the massless
//! Dirac action, axial torsion, and the two leading counting-function
//! coefficients.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::grid::Grid;
use crate::matrix_field::{max_abs, Mat2};
use crate::spinor::SpinorField;
use crate::symbol::{coframe, frame_from_symbol, metric_from_symbol, Charge, Frame, Mat3, Metric, PrincipalSymbol};
use crate::trig::TrigPoly;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Generalized Pauli matrices `σ^α` of a reference symbol on a grid, with
/// their lowered versions and exact first derivatives.
#[derive(Clone, Debug)]
pub struct PauliField {
    grid: Grid,
    upper: [Vec<Mat2>; 3],
    lower: [Vec<Mat2>; 3],
    derivatives: [[Vec<Mat2>; 3]; 3],
}

impl PauliField {
    pub fn new(reference: &PrincipalSymbol, metric: &Metric) -> Self {
        let grid = metric.grid().clone();
        let upper = reference.sample(&grid);
        let derivatives =
            [0, 1, 2].map(|a| [0, 1, 2].map(|b| reference.component(b).derivative(a).sample(&grid)));
        let lower = [0, 1, 2].map(|a| {
            (0..grid.len())
                .into_par_iter()
                .map(|i| {
                    let g = &metric.covariant()[i];
                    (0..3).fold(Mat2::zeros(), |acc, b| acc + upper[b][i] * Complex64::from(g[(a, b)]))
                })
                .collect()
        });
        Self {
            grid,
            upper,
            lower,
            derivatives,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `σ^α` at each node.
    pub fn upper(&self, alpha: usize) -> &[Mat2] {
        &self.upper[alpha]
    }

    /// `σ_α = g_{αβ} σ^β` at each node.
    pub fn lower(&self, alpha: usize) -> &[Mat2] {
        &self.lower[alpha]
    }

    /// `∂_α σ^β` at each node.
    pub fn derivative(&self, alpha: usize, beta: usize) -> &[Mat2] {
        &self.derivatives[alpha][beta]
    }

    /// `max |σ^α σ^β + σ^β σ^α − 2 I g^{αβ}|`.
    pub fn relation_residual(&self, metric: &Metric) -> f64 {
        (0..self.grid.len())
            .into_par_iter()
            .map(|i| {
                let g = &metric.contravariant()[i];
                let mut worst: f64 = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        let s = self.upper[a][i] * self.upper[b][i] + self.upper[b][i] * self.upper[a][i];
                        worst = worst.max(max_abs(&(s - Mat2::identity() * Complex64::from(2.0 * g[(a, b)]))));
                    }
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// `Γ^β_{αγ}` stored as `gamma[node][β][α][γ]`.
#[derive(Clone, Debug)]
pub struct ChristoffelField {
    grid: Grid,
    gamma: Vec<[[[f64; 3]; 3]; 3]>,
    metric_derivatives: [Vec<Mat3>; 3],
}

impl ChristoffelField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn at(&self, idx: usize) -> &[[[f64; 3]; 3]; 3] {
        &self.gamma[idx]
    }

    /// `Γ^β_{αγ}` at every node.
    pub fn component(&self, beta: usize, alpha: usize, gamma: usize) -> Vec<f64> {
        self.gamma.iter().map(|g| g[beta][alpha][gamma]).collect()
    }

    pub fn symmetry_residual(&self) -> f64 {
        self.gamma
            .par_iter()
            .map(|g| {
                let mut w: f64 = 0.0;
                for b in 0..3 {
                    for a in 0..3 {
                        for c in 0..3 {
                            w = w.max((g[b][a][c] - g[b][c][a]).abs());
                        }
                    }
                }
                w
            })
            .reduce(|| 0.0, f64::max)
    }

    /// `max |∂_α g_{βγ} − Γ^δ_{αβ} g_{δγ} − Γ^δ_{αγ} g_{βδ}|`.
    pub fn compatibility_residual(&self, metric: &Metric) -> f64 {
        (0..self.grid.len())
            .into_par_iter()
            .map(|i| {
                let g = &metric.covariant()[i];
                let gam = &self.gamma[i];
                let mut w: f64 = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        for c in 0..3 {
                            let mut r = self.metric_derivatives[a][i][(b, c)];
                            for d in 0..3 {
                                r -= gam[d][a][b] * g[(d, c)] + gam[d][a][c] * g[(b, d)];
                            }
                            w = w.max(r.abs());
                        }
                    }
                }
                w
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// `∂_δ g_{αβ}` by spectral differentiation of the grid values.
fn covariant_metric_derivatives(metric: &Metric) -> [Vec<Mat3>; 3] {
    let grid = metric.grid();
    let mut out = [0, 1, 2].map(|_| vec![Mat3::zeros(); grid.len()]);
    for a in 0..3 {
        for b in a..3 {
            let v: Vec<f64> = metric.covariant().iter().map(|g| g[(a, b)]).collect();
            let grad = grid.gradient_real(&v);
            for (d, gd) in grad.iter().enumerate() {
                for (m, x) in out[d].iter_mut().zip(gd) {
                    m[(a, b)] = *x;
                    m[(b, a)] = *x;
                }
            }
        }
    }
    out
}

/// `Γ^β_{αγ} = ½ g^{βδ}(∂_α g_{γδ} + ∂_γ g_{αδ} − ∂_δ g_{αγ})`.
pub fn christoffel(metric: &Metric) -> ChristoffelField {
    let dg = covariant_metric_derivatives(metric);
    let gamma = (0..metric.grid().len())
        .into_par_iter()
        .map(|i| {
            let ginv = &metric.contravariant()[i];
            let mut out = [[[0.0; 3]; 3]; 3];
            for a in 0..3 {
                for c in a..3 {
                    let lowered: [f64; 3] =
                        [0, 1, 2].map(|d| dg[a][i][(c, d)] + dg[c][i][(a, d)] - dg[d][i][(a, c)]);
                    for (b, row) in out.iter_mut().enumerate() {
                        let v = 0.5 * (0..3).map(|d| ginv[(b, d)] * lowered[d]).sum::<f64>();
                        row[a][c] = v;
                        row[c][a] = v;
                    }
                }
            }
            out
        })
        .collect();
    ChristoffelField {
        grid: metric.grid().clone(),
        gamma,
        metric_derivatives: dg,
    }
}

/// `W = −i σ^α (∂_α + Ω_α)`, `Ω_α = ¼ σ_β (∂_α σ^β + Γ^β_{αγ} σ^γ)`.
#[derive(Clone, Debug)]
pub struct WeylOperator {
    metric: Metric,
    pauli: PauliField,
    christoffel: ChristoffelField,
    connection: [Vec<Mat2>; 3],
}

impl WeylOperator {
    pub fn new(reference: &PrincipalSymbol, metric: &Metric) -> Self {
        let pauli = PauliField::new(reference, metric);
        let christoffel = christoffel(metric);
        let connection = [0, 1, 2].map(|a| {
            (0..metric.grid().len())
                .into_par_iter()
                .map(|i| {
                    let gam = christoffel.at(i);
                    let mut omega = Mat2::zeros();
                    for b in 0..3 {
                        let mut inner = pauli.derivatives[a][b][i];
                        for c in 0..3 {
                            inner += pauli.upper[c][i] * Complex64::from(gam[b][a][c]);
                        }
                        omega += pauli.lower[b][i] * inner;
                    }
                    omega * Complex64::from(0.25)
                })
                .collect()
        });
        Self {
            metric: metric.clone(),
            pauli,
            christoffel,
            connection,
        }
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn pauli(&self) -> &PauliField {
        &self.pauli
    }

    pub fn christoffel(&self) -> &ChristoffelField {
        &self.christoffel
    }

    pub fn apply(&self, xi: &SpinorField) -> [Vec<Complex64>; 2] {
        let grid = self.metric.grid();
        let grads = [grid.gradient(xi.component(0)), grid.gradient(xi.component(1))];
        let (w1, w2): (Vec<_>, Vec<_>) = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let v = nalgebra::Vector2::new(xi.component(0)[i], xi.component(1)[i]);
                let mut out = nalgebra::Vector2::zeros();
                for a in 0..3 {
                    let d = nalgebra::Vector2::new(grads[0][a][i], grads[1][a][i]);
                    out += self.pauli.upper[a][i] * (d + self.connection[a][i] * v);
                }
                out *= -I;
                (out[0], out[1])
            })
            .unzip();
        [w1, w2]
    }

    /// `Re(ξ* W ξ)` at each node.
    pub fn density(&self, xi: &SpinorField) -> Vec<f64> {
        let w = self.apply(xi);
        (0..xi.grid().len())
            .into_par_iter()
            .map(|i| (xi.component(0)[i].conj() * w[0][i] + xi.component(1)[i].conj() * w[1][i]).re)
            .collect()
    }

    /// `S(ξ) = ∫ Re(ξ* W ξ) √det g dx`.
    pub fn action(&self, xi: &SpinorField) -> f64 {
        let weighted: Vec<f64> = self
            .density(xi)
            .into_par_iter()
            .zip(self.metric.sqrt_det())
            .map(|(d, s)| d * s)
            .collect();
        self.metric.grid().integrate(&weighted)
    }
}

pub fn weyl_apply(reference: &PrincipalSymbol, metric: &Metric, xi: &SpinorField) -> [Vec<Complex64>; 2] {
    WeylOperator::new(reference, metric).apply(xi)
}

pub fn dirac_action(reference: &PrincipalSymbol, metric: &Metric, xi: &SpinorField) -> f64 {
    WeylOperator::new(reference, metric).action(xi)
}

/// Hodge dual of axial torsion, `*T^ax`, at each node.
#[derive(Clone, Debug)]
pub struct TorsionScalar {
    pub values: Vec<f64>,
}

impl TorsionScalar {
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `*T^ax = ⅓ √det g^{αβ} δ_{kl} (e^k_1 ∂_2 e^l_3 + e^k_2 ∂_3 e^l_1 + e^k_3 ∂_1 e^l_2
///  − e^k_1 ∂_3 e^l_2 − e^k_2 ∂_1 e^l_3 − e^k_3 ∂_2 e^l_1)`.
pub fn axial_torsion(frame: &Frame, metric: &Metric) -> TorsionScalar {
    let grid = metric.grid();
    let co = coframe(metric, frame);
    // d[k][a][b] = ∂_b e^k_a
    let d: Vec<Vec<[Vec<f64>; 3]>> = (0..3)
        .map(|k| {
            (0..3)
                .map(|a| {
                    let v: Vec<f64> = co.values().iter().map(|m| m[(k, a)]).collect();
                    grid.gradient_real(&v)
                })
                .collect()
        })
        .collect();
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let e = &co.values()[i];
            let mut s = 0.0;
            for k in 0..3 {
                let de = |a: usize, b: usize| d[k][a][b][i];
                s += e[(k, 0)] * de(2, 1) + e[(k, 1)] * de(0, 2) + e[(k, 2)] * de(1, 0)
                    - e[(k, 0)] * de(1, 2)
                    - e[(k, 1)] * de(2, 0)
                    - e[(k, 2)] * de(0, 1);
            }
            s / (3.0 * metric.sqrt_det()[i])
        })
        .collect();
    TorsionScalar { values }
}

/// `c *T^ax − 4 Re(ξ* W ξ) / (3‖ξ‖²)` at each node.
pub fn torsion_spinor_identity_residual(
    frame: &Frame,
    weyl: &WeylOperator,
    xi: &SpinorField,
    charge: Charge,
) -> Vec<f64> {
    let t = axial_torsion(frame, weyl.metric());
    let dens = weyl.density(xi);
    t.values
        .par_iter()
        .zip(&dens)
        .zip(xi.norms())
        .map(|((t, d), n)| charge.sign() * t - 4.0 * d / (3.0 * n * n))
        .collect()
}

/// `a = (1/6π²) ∫ ‖ξ‖³ √det g dx`.
pub fn coeff_a(xi: &SpinorField, metric: &Metric) -> f64 {
    let v: Vec<f64> = xi.norms().par_iter().zip(metric.sqrt_det()).map(|(n, s)| n.powi(3) * s).collect();
    metric.grid().integrate(&v) / (6.0 * PI * PI)
}

/// `b = S(ξ) / 2π²`.
pub fn coeff_b_action(xi: &SpinorField, weyl: &WeylOperator) -> f64 {
    weyl.action(xi) / (2.0 * PI * PI)
}

/// `b = (3c/8π²) ∫ w² *T^ax √det g dx`.
pub fn coeff_b_torsion(w: &[f64], frame: &Frame, metric: &Metric, charge: Charge) -> f64 {
    let t = axial_torsion(frame, metric);
    let v: Vec<f64> = t
        .values
        .par_iter()
        .zip(w)
        .zip(metric.sqrt_det())
        .map(|((t, w), s)| w * w * t * s)
        .collect();
    3.0 * charge.sign() * metric.grid().integrate(&v) / (8.0 * PI * PI)
}

/// Torsion-route `b` after the coordinate inversion `x ↦ −x`, which turns a
/// charge −1 symbol into a charge +1 one: `L'^(α)(y) = −L^(α)(−y)`,
/// `w'(y) = w(−y)`.
pub fn coeff_b_torsion_inverted(sym: &PrincipalSymbol, w: &TrigPoly, grid: &Grid, charge: Charge) -> f64 {
    let inverted = sym.invert_coordinates();
    let metric = metric_from_symbol(&inverted, grid);
    let frame = frame_from_symbol(&inverted);
    coeff_b_torsion(&w.reflect().sample_real(grid), &frame, &metric, charge.flip())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::grid::torus_volume;
    use crate::spinor::{charge_conjugate, conformal_transform, extract_spinor, rigid_rotation};

    fn example(grid: &Grid) -> (WeylOperator, SpinorField) {
        let metric = Metric::flat(grid);
        let weyl = WeylOperator::new(&PrincipalSymbol::standard_pauli(), &metric);
        (weyl, SpinorField::from_polys(grid, &catalog::example_spinor()))
    }

    #[test]
    fn flat_christoffel_vanishes() {
        let g = Grid::new(8);
        let c = christoffel(&Metric::flat(&g));
        assert!(c.gamma.iter().flatten().flatten().flatten().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn christoffel_of_stretched_first_axis() {
        let g = Grid::new(32);
        let values = g
            .sample(|x| 1.0 + 0.5 * x[0].cos())
            .into_iter()
            .map(|g11| {
                let mut m = Mat3::identity();
                m[(0, 0)] = g11;
                m
            })
            .collect();
        let metric = Metric::from_covariant(&g, values);
        let c = christoffel(&metric);
        for idx in (0..g.len()).step_by(29) {
            let x = g.point(idx)[0];
            let expect = -0.25 * x.sin() / (1.0 + 0.5 * x.cos());
            let gam = c.at(idx);
            assert!((gam[0][0][0] - expect).abs() < 1e-12);
            let others: f64 = gam.iter().flatten().flatten().map(|v| v.abs()).sum::<f64>() - gam[0][0][0].abs();
            assert!(others < 1e-12);
        }
        assert!(c.symmetry_residual() == 0.0);
        assert!(c.compatibility_residual(&metric) < 1e-12);
    }

    #[test]
    fn christoffel_of_conformally_flat_metric() {
        let g = Grid::new(32);
        let phi = |x: [f64; 3]| 0.2 * x[0].cos() + 0.1 * (x[1] - x[2]).sin();
        let dphi = |x: [f64; 3]| [-0.2 * x[0].sin(), 0.1 * (x[1] - x[2]).cos(), -0.1 * (x[1] - x[2]).cos()];
        let values = g.sample(|x| (-2.0 * phi(x)).exp()).into_iter().map(|f| Mat3::identity() * f).collect();
        let metric = Metric::from_contravariant(&g, values);
        let c = christoffel(&metric);
        let mut worst: f64 = 0.0;
        for idx in (0..g.len()).step_by(17) {
            let dp = dphi(g.point(idx));
            let gam = c.at(idx);
            for b in 0..3 {
                for a in 0..3 {
                    for cc in 0..3 {
                        let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
                        let expect = d(b, a) * dp[cc] + d(b, cc) * dp[a] - d(a, cc) * dp[b];
                        worst = worst.max((gam[b][a][cc] - expect).abs());
                    }
                }
            }
        }
        assert!(worst < 1e-10, "{worst}");
        assert!(c.compatibility_residual(&metric) < 1e-10);
    }

    #[test]
    fn weyl_on_constant_and_example_spinors() {
        let g = Grid::new(16);
        let (weyl, xi) = example(&g);
        let one = SpinorField::new(&g, [vec![Complex64::from(1.0); g.len()], vec![Complex64::from(0.0); g.len()]]);
        let w0 = weyl.apply(&one);
        assert!(w0.iter().flatten().all(|z| z.norm() < 1e-14));
        assert!(weyl.action(&one).abs() < 1e-12);

        let w = weyl.apply(&xi);
        for (idx, (a, b)) in w[0].iter().zip(&w[1]).enumerate() {
            let e = Complex64::new(0.0, -g.point(idx)[2]).exp();
            assert!((a + e).norm() < 1e-13 && b.norm() < 1e-13);
        }
        let s = weyl.action(&xi);
        assert!((s + torus_volume()).abs() < 1e-9 * torus_volume());
        assert!((weyl.action(&charge_conjugate(&xi)) - s).abs() < 1e-9 * torus_volume());
        assert!(weyl.pauli().relation_residual(weyl.metric()) < 1e-15);
    }

    #[test]
    fn example_coefficients_and_torsion() {
        let g = Grid::new(16);
        let (weyl, xi) = example(&g);
        let metric = weyl.metric();
        assert!((coeff_a(&xi, metric) - 4.0 * PI / 3.0).abs() < 1e-12);
        assert!((coeff_b_action(&xi, &weyl) + 4.0 * PI).abs() < 1e-11);
        let frame = frame_from_symbol(&catalog::example_symbol());
        let t = axial_torsion(&frame, metric);
        assert!(t.values.iter().all(|v| (v + 4.0 / 3.0).abs() < 1e-12));
        let one = vec![1.0; g.len()];
        assert!((coeff_b_torsion(&one, &frame, metric, Charge::Positive) + 4.0 * PI).abs() < 1e-11);
        let res = torsion_spinor_identity_residual(&frame, &weyl, &xi, Charge::Positive);
        assert!(res.iter().all(|r| r.abs() < 1e-12));
        // w ≡ 2
        let two = xi.scale(&vec![2.0; g.len()]);
        assert!((coeff_a(&two, metric) - 32.0 * PI / 3.0).abs() < 1e-11);
    }

    #[test]
    fn identity_frame_has_no_torsion() {
        let g = Grid::new(8);
        let metric = Metric::flat(&g);
        let t = axial_torsion(&Frame::identity(), &metric);
        assert!(t.values.iter().all(|v| v.abs() < 1e-15));
        assert_eq!(coeff_b_torsion(&vec![1.0; g.len()], &Frame::identity(), &metric, Charge::Positive), 0.0);
    }

    #[test]
    fn torsion_is_invariant_under_constant_rotation() {
        let g = Grid::new(16);
        let metric = Metric::flat(&g);
        let frame = frame_from_symbol(&catalog::example_symbol());
        let o = crate::spinor::rotation_of(&catalog::constant_su2(0.3, -0.8, 0.5));
        let a = axial_torsion(&frame, &metric);
        let b = axial_torsion(&frame.rotate(&o), &metric);
        assert!(a.values.iter().zip(&b.values).all(|(x, y)| (x - y).abs() < 1e-12));
    }

    #[test]
    fn flipped_example_and_inversion() {
        let g = Grid::new(16);
        let sym = catalog::twisted_symbol(2, true);
        let reference = catalog::pauli_reference(true);
        let metric = metric_from_symbol(&sym, &g);
        let one = vec![1.0; g.len()];
        let data = extract_spinor(&sym, &reference, &one, &metric).unwrap();
        let weyl = WeylOperator::new(&reference, &metric);
        let t = axial_torsion(&data.frame, &metric);
        assert!(t.values.iter().all(|v| (v - 4.0 / 3.0).abs() < 1e-12));
        let b_action = coeff_b_action(&data.spinor, &weyl);
        let b_torsion = coeff_b_torsion(&one, &data.frame, &metric, Charge::Negative);
        let b_inverted = coeff_b_torsion_inverted(&sym, &TrigPoly::constant(1.0), &g, Charge::Negative);
        for b in [b_action, b_torsion, b_inverted] {
            assert!((b + 4.0 * PI).abs() < 1e-11, "{b}");
        }
    }

    #[test]
    fn rigid_rotation_preserves_density() {
        let g = Grid::new(16);
        let (weyl, xi) = example(&g);
        let q = catalog::constant_su2(0.9, 0.4, -1.3);
        let a = weyl.density(&xi);
        let b = weyl.density(&rigid_rotation(&xi, &q));
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
    }

    #[test]
    fn weyl_is_conformally_covariant() {
        let g = Grid::new(32);
        let phi = TrigPoly::cos_sin([1, 0, 0], 0.3, 0.0) + TrigPoly::cos_sin([0, 1, 1], 0.0, 0.2);
        let sym = catalog::example_symbol();
        let reference = PrincipalSymbol::standard_pauli();
        let w = TrigPoly::constant(1.0);
        let metric = Metric::flat(&g);
        let before = extract_spinor(&sym, &reference, &w.sample_real(&g), &metric).unwrap();
        let wb = WeylOperator::new(&reference, &metric).apply(&before.spinor);

        let (sym2, w2) = conformal_transform(&sym, &w, &phi, &g);
        let (ref2, _) = conformal_transform(&reference, &w, &phi, &g);
        let metric2 = metric_from_symbol(&sym2, &g);
        let after = extract_spinor(&sym2, &ref2, &w2.sample_real(&g), &metric2).unwrap();
        let wa = WeylOperator::new(&ref2, &metric2).apply(&after.spinor);
        let f = phi.sample_real(&g);
        // the lifts may differ by a global sign; Wξ is linear in ξ
        let sign = if (after.spinor.component(0)[0] * before.spinor.component(0)[0].conj()).re >= 0.0 { 1.0 } else { -1.0 };
        let mut worst: f64 = 0.0;
        for i in 0..g.len() {
            let s = (-2.0 * f[i]).exp() * sign;
            worst = worst.max((wa[0][i] - wb[0][i] * s).norm()).max((wa[1][i] - wb[1][i] * s).norm());
        }
        assert!(worst < 1e-9, "{worst}");
    }
}
