//! Gauge relation between a symbol and its reference: the SO(3) field
//! between their frames, its lift to SU(2) with global sign resolution, the
//! spinor field, and the conformal, SU(2) and rigid-rotation gauges.

use std::collections::VecDeque;

use nalgebra::Matrix3;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Cycle, Error, Result};
use crate::grid::Grid;
use crate::matrix_field::{max_abs, pauli, Mat2, MatrixField};
use crate::symbol::{frame_from_symbol, Frame, Mat3, Metric, PrincipalSymbol};
use crate::tolerances;
use crate::trig::TrigPoly;

#[derive(Clone, Debug)]
pub struct SO3Field {
    grid: Grid,
    values: Vec<Mat3>,
}

impl SO3Field {
    pub fn new(grid: &Grid, values: Vec<Mat3>) -> Self {
        assert_eq!(values.len(), grid.len());
        Self { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Mat3] {
        &self.values
    }

    pub fn transpose(&self) -> Self {
        Self::new(&self.grid, self.values.iter().map(Matrix3::transpose).collect())
    }

    /// `max |O Oᵀ − I|`.
    pub fn orthogonality_residual(&self) -> f64 {
        self.values
            .par_iter()
            .map(|o| (o * o.transpose() - Mat3::identity()).amax())
            .reduce(|| 0.0, f64::max)
    }

    pub fn min_determinant(&self) -> f64 {
        self.values.par_iter().map(Matrix3::determinant).reduce(|| f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug)]
pub struct SU2Field {
    grid: Grid,
    values: Vec<Mat2>,
    sign_resolved: bool,
}

impl SU2Field {
    pub fn new(grid: &Grid, values: Vec<Mat2>, sign_resolved: bool) -> Self {
        assert_eq!(values.len(), grid.len());
        Self {
            grid: grid.clone(),
            values,
            sign_resolved,
        }
    }

    pub fn from_field(grid: &Grid, field: &MatrixField) -> Self {
        Self::new(grid, field.sample(grid), true)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Mat2] {
        &self.values
    }

    pub fn is_sign_resolved(&self) -> bool {
        self.sign_resolved
    }

    pub fn negate(&self) -> Self {
        Self::new(&self.grid, self.values.iter().map(|r| -r).collect(), self.sign_resolved)
    }

    /// `max |R R* − I| + |det R − 1|`.
    pub fn unitarity_residual(&self) -> f64 {
        self.values
            .par_iter()
            .map(|r| max_abs(&(r * r.adjoint() - Mat2::identity())) + (r.determinant() - 1.0).norm())
            .reduce(|| 0.0, f64::max)
    }

    /// `max |½ tr(s_j R s^k R*) − O_j^k|`.
    pub fn lift_residual(&self, o: &SO3Field) -> f64 {
        self.values
            .par_iter()
            .zip(o.values())
            .map(|(r, o)| (rotation_of(r) - o).amax())
            .reduce(|| 0.0, f64::max)
    }

    /// Max pointwise distance to `other`, minimized over the global sign.
    pub fn max_deviation_up_to_sign(&self, other: &[Mat2]) -> f64 {
        let dev = |s: f64| {
            self.values
                .par_iter()
                .zip(other)
                .map(|(a, b)| max_abs(&(a - b * Complex64::from(s))))
                .reduce(|| 0.0, f64::max)
        };
        dev(1.0).min(dev(-1.0))
    }
}

/// `O_j^k = ½ tr(s_j R s^k R*)`.
pub fn rotation_of(r: &Mat2) -> Mat3 {
    let ra = r.adjoint();
    let conj: [Mat2; 3] = [0, 1, 2].map(|k| r * pauli(k) * ra);
    Mat3::from_fn(|j, k| 0.5 * (pauli(j) * conj[k]).trace().re)
}

/// Unit quaternion `(w, x, y, z)` of a rotation matrix, largest-pivot branch.
fn quaternion(o: &Mat3) -> [f64; 4] {
    let tr = o.trace();
    let d = [o[(0, 0)], o[(1, 1)], o[(2, 2)]];
    if tr >= d[0] && tr >= d[1] && tr >= d[2] {
        let w = 0.5 * (1.0 + tr).max(0.0).sqrt();
        let f = 0.25 / w;
        [w, (o[(2, 1)] - o[(1, 2)]) * f, (o[(0, 2)] - o[(2, 0)]) * f, (o[(1, 0)] - o[(0, 1)]) * f]
    } else if d[0] >= d[1] && d[0] >= d[2] {
        let x = 0.5 * (1.0 + d[0] - d[1] - d[2]).max(0.0).sqrt();
        let f = 0.25 / x;
        [(o[(2, 1)] - o[(1, 2)]) * f, x, (o[(0, 1)] + o[(1, 0)]) * f, (o[(0, 2)] + o[(2, 0)]) * f]
    } else if d[1] >= d[2] {
        let y = 0.5 * (1.0 - d[0] + d[1] - d[2]).max(0.0).sqrt();
        let f = 0.25 / y;
        [(o[(0, 2)] - o[(2, 0)]) * f, (o[(0, 1)] + o[(1, 0)]) * f, y, (o[(1, 2)] + o[(2, 1)]) * f]
    } else {
        let z = 0.5 * (1.0 - d[0] - d[1] + d[2]).max(0.0).sqrt();
        let f = 0.25 / z;
        [(o[(1, 0)] - o[(0, 1)]) * f, (o[(0, 2)] + o[(2, 0)]) * f, (o[(1, 2)] + o[(2, 1)]) * f, z]
    }
}

/// `R = w I − i (x s¹ + y s² + z s³)`.
fn su2_of_quaternion(q: [f64; 4]) -> Mat2 {
    let [w, x, y, z] = q;
    Mat2::new(
        Complex64::new(w, -z),
        Complex64::new(-y, -x),
        Complex64::new(y, -x),
        Complex64::new(w, z),
    )
}

/// Pointwise lift of a constant rotation, sign unresolved.
pub fn su2_of_rotation(o: &Mat3) -> Mat2 {
    su2_of_quaternion(quaternion(o))
}

/// `O_j^k = g(e_j, e̊_k)`, so that `e_j = O_j^k e̊_k`.
pub fn relate_frames(frame: &Frame, reference: &Frame, metric: &Metric) -> Result<SO3Field> {
    let grid = metric.grid();
    let e = frame.sample(grid);
    let r = reference.sample(grid);
    let deviation = e
        .par_iter()
        .zip(&r)
        .zip(metric.contravariant())
        .map(|((e, r), g)| (e.transpose() * e - g).amax().max((r.transpose() * r - g).amax()))
        .reduce(|| 0.0, f64::max);
    if !(deviation <= tolerances::FRAME) {
        return Err(Error::MetricMismatch { deviation });
    }
    let values: Vec<Mat3> = e
        .par_iter()
        .zip(&r)
        .zip(metric.covariant())
        .map(|((e, r), g)| e * g * r.transpose())
        .collect();
    if values.par_iter().any(|o| o.determinant() < 0.0) {
        return Err(Error::ChargeMismatch);
    }
    Ok(SO3Field::new(grid, values))
}

fn edge_overlap(a: &Mat2, b: &Mat2) -> f64 {
    (a.adjoint() * b).trace().re
}

/// Lift with the convention `Re tr R(0) ≥ 0`.
pub fn so3_to_su2_lift(o: &SO3Field) -> Result<SU2Field> {
    let r = lift_with_root(o, 0)?;
    if r.values()[0].trace().re < 0.0 {
        Ok(r.negate())
    } else {
        Ok(r)
    }
}

/// Lift whose sign is fixed by the pointwise quaternion at `root`.
pub fn lift_with_root(o: &SO3Field, root: usize) -> Result<SU2Field> {
    let grid = o.grid();
    let n = grid.n();
    if let Some((node, res)) = o
        .values()
        .par_iter()
        .map(|m| (m * m.transpose() - Mat3::identity()).amax())
        .enumerate()
        .find_any(|(_, r)| !(*r <= tolerances::ORTHOGONALITY))
    {
        return Err(Error::LiftIllConditioned {
            node,
            reason: format!("input is not orthogonal (residual {res:.3e})"),
        });
    }
    let raw: Vec<Mat2> = o.values().par_iter().map(su2_of_rotation).collect();

    // Sign of each edge to the next node along every axis. Adjacent samples
    // closer than 120° in SO(3) have |Re tr(R_a* R_b)| ≥ 1.
    let edges: Vec<[i8; 3]> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            [0, 1, 2].map(|axis| {
                let t = edge_overlap(&raw[idx], &raw[grid.neighbor(idx, axis)]);
                if t.abs() < 1.0 {
                    0
                } else if t > 0.0 {
                    1
                } else {
                    -1
                }
            })
        })
        .collect();
    if let Some(node) = edges.par_iter().position_any(|e| e.contains(&0)) {
        return Err(Error::LiftIllConditioned {
            node,
            reason: "adjacent rotations differ by 120° or more; refine the grid".into(),
        });
    }

    let bad_plaquette = (0..grid.len()).into_par_iter().find_map_any(|idx| {
        for (a, b) in [(0, 1), (1, 2), (0, 2)] {
            let holonomy = edges[idx][a]
                * edges[grid.neighbor(idx, a)][b]
                * edges[grid.neighbor(idx, b)][a]
                * edges[idx][b];
            if holonomy < 0 {
                return Some(idx);
            }
        }
        None
    });
    if let Some(node) = bad_plaquette {
        return Err(Error::LiftIllConditioned {
            node,
            reason: "sign holonomy around a grid plaquette; refine the grid".into(),
        });
    }

    for axis in 0..3 {
        let mut node = root;
        let mut holonomy = 1i8;
        for _ in 0..n {
            holonomy *= edges[node][axis];
            node = grid.neighbor(node, axis);
        }
        if holonomy < 0 {
            return Err(Error::SpinStructureMismatch { cycle: Cycle::from_axis(axis) });
        }
    }

    let mut sign = vec![0i8; grid.len()];
    sign[root] = 1;
    let mut queue = VecDeque::from([root]);
    while let Some(idx) = queue.pop_front() {
        let c = grid.coords(idx);
        for axis in 0..3 {
            let fwd = grid.neighbor(idx, axis);
            let mut back = c;
            back[axis] = (c[axis] + n - 1) % n;
            let back = grid.index(back);
            for (next, s) in [(fwd, edges[idx][axis]), (back, edges[back][axis])] {
                if sign[next] == 0 {
                    sign[next] = sign[idx] * s;
                    queue.push_back(next);
                }
            }
        }
    }

    let values: Vec<Mat2> = raw
        .into_par_iter()
        .zip(&sign)
        .map(|(r, &s)| r * Complex64::from(s as f64))
        .collect();
    let lifted = SU2Field::new(grid, values, true);

    let broken = (0..grid.len()).into_par_iter().find_any(|&idx| {
        (0..3).any(|axis| edge_overlap(&lifted.values[idx], &lifted.values[grid.neighbor(idx, axis)]) < 0.0)
    });
    if let Some(node) = broken {
        return Err(Error::LiftIllConditioned {
            node,
            reason: "sign propagation left a discontinuous edge".into(),
        });
    }
    let residual = lifted.lift_residual(o);
    if !(residual <= tolerances::LIFT) {
        return Err(Error::LiftIllConditioned {
            node: 0,
            reason: format!("lift residual {residual:.3e}"),
        });
    }
    Ok(lifted)
}

/// Two-component spinor on a grid with its weight `w = ‖ξ‖`.
#[derive(Clone, Debug)]
pub struct SpinorField {
    grid: Grid,
    components: [Vec<Complex64>; 2],
    weight: Vec<f64>,
}

impl SpinorField {
    pub fn new(grid: &Grid, components: [Vec<Complex64>; 2]) -> Self {
        let weight = components[0]
            .par_iter()
            .zip(&components[1])
            .map(|(a, b)| (a.norm_sqr() + b.norm_sqr()).sqrt())
            .collect();
        Self {
            grid: grid.clone(),
            components,
            weight,
        }
    }

    pub fn from_polys(grid: &Grid, xi: &[TrigPoly; 2]) -> Self {
        Self::new(grid, [xi[0].sample(grid), xi[1].sample(grid)])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn component(&self, a: usize) -> &[Complex64] {
        &self.components[a]
    }

    pub fn components(&self) -> &[Vec<Complex64>; 2] {
        &self.components
    }

    pub fn at(&self, idx: usize) -> [Complex64; 2] {
        [self.components[0][idx], self.components[1][idx]]
    }

    /// Pointwise `‖ξ‖`.
    pub fn norms(&self) -> &[f64] {
        &self.weight
    }

    pub fn min_norm(&self) -> f64 {
        self.weight.par_iter().copied().reduce(|| f64::INFINITY, f64::min)
    }

    pub fn scale(&self, factor: &[f64]) -> Self {
        let c = [0, 1].map(|a| {
            self.components[a]
                .par_iter()
                .zip(factor)
                .map(|(z, f)| z * f)
                .collect()
        });
        Self::new(&self.grid, c)
    }

    pub fn negate(&self) -> Self {
        Self::new(&self.grid, self.components.clone().map(|c| c.into_iter().map(|z| -z).collect()))
    }

    pub fn max_deviation(&self, other: &SpinorField) -> f64 {
        (0..2)
            .map(|a| {
                self.components[a]
                    .par_iter()
                    .zip(&other.components[a])
                    .map(|(x, y)| (x - y).norm())
                    .reduce(|| 0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    pub fn max_deviation_up_to_sign(&self, other: &SpinorField) -> f64 {
        self.max_deviation(other).min(self.max_deviation(&other.negate()))
    }
}

/// `ξ¹ = w R₂₂`, `ξ² = −w R₂₁`.
pub fn spinor_from_su2(r: &SU2Field, w: &[f64]) -> SpinorField {
    let v = r.values();
    let xi1 = v.par_iter().zip(w).map(|(r, w)| r[(1, 1)] * w).collect();
    let xi2 = v.par_iter().zip(w).map(|(r, w)| -r[(1, 0)] * w).collect();
    SpinorField::new(r.grid(), [xi1, xi2])
}

/// `R = ‖ξ‖⁻¹ [[ξ̄¹, ξ̄²], [−ξ², ξ¹]]` and `w = ‖ξ‖`.
pub fn su2_from_spinor(xi: &SpinorField) -> Result<(SU2Field, Vec<f64>)> {
    let min_norm = xi.min_norm();
    if !(min_norm >= tolerances::MIN_SPINOR_NORM) {
        return Err(Error::VanishingSpinor { min_norm });
    }
    let values = (0..xi.grid().len())
        .into_par_iter()
        .map(|i| {
            let [a, b] = xi.at(i);
            let s = 1.0 / xi.norms()[i];
            Mat2::new(a.conj() * s, b.conj() * s, -b * s, a * s)
        })
        .collect();
    Ok((SU2Field::new(xi.grid(), values, true), xi.norms().to_vec()))
}

/// `C(ξ) = (−ξ̄², ξ̄¹)`.
pub fn charge_conjugate(xi: &SpinorField) -> SpinorField {
    let c1 = xi.components[1].par_iter().map(|z| -z.conj()).collect();
    let c2 = xi.components[0].par_iter().map(|z| z.conj()).collect();
    SpinorField::new(&xi.grid, [c1, c2])
}

/// `ξ ↦ Q₂₂ ξ − Q₂₁ C(ξ)` for constant special unitary `Q`.
pub fn rigid_rotation(xi: &SpinorField, q: &Mat2) -> SpinorField {
    let c = charge_conjugate(xi);
    let (a, b) = (q[(1, 1)], q[(1, 0)]);
    let comps = [0, 1].map(|k| {
        xi.components[k]
            .par_iter()
            .zip(&c.components[k])
            .map(|(x, cx)| a * x - b * cx)
            .collect()
    });
    SpinorField::new(&xi.grid, comps)
}

/// `σ ↦ Q σ Q*`.
pub fn su2_reference_transform(reference: &PrincipalSymbol, q: &MatrixField) -> PrincipalSymbol {
    reference.conjugate(q)
}

/// `ξ ↦ Q ξ`, the spinor induced by an SU(2) change of reference.
pub fn su2_spinor_transform(xi: &SpinorField, q: &MatrixField) -> SpinorField {
    let qs = q.sample(xi.grid());
    let (c1, c2): (Vec<_>, Vec<_>) = (0..xi.grid().len())
        .into_par_iter()
        .map(|i| {
            let [a, b] = xi.at(i);
            let m = &qs[i];
            (m[(0, 0)] * a + m[(0, 1)] * b, m[(1, 0)] * a + m[(1, 1)] * b)
        })
        .unzip();
    SpinorField::new(xi.grid(), [c1, c2])
}

/// `(L_prin, w) ↦ (e^{−φ} L_prin, e^{−φ} w)`, products formed on the grid and
/// re-expanded.
pub fn conformal_transform(
    sym: &PrincipalSymbol,
    w: &TrigPoly,
    phi: &TrigPoly,
    grid: &Grid,
) -> (PrincipalSymbol, TrigPoly) {
    let factor: Vec<f64> = phi.sample_real(grid).into_par_iter().map(|p| (-p).exp()).collect();
    let s = sym.sample(grid);
    let scaled = [0, 1, 2].map(|a| {
        s[a].par_iter()
            .zip(&factor)
            .map(|(m, f)| m * Complex64::from(*f))
            .collect::<Vec<_>>()
    });
    let w_new: Vec<f64> = w.sample_real(grid).into_iter().zip(&factor).map(|(w, f)| w * f).collect();
    (
        PrincipalSymbol::from_grid(grid, &scaled),
        TrigPoly::from_grid_real(grid, &w_new, tolerances::REEXPANSION_DROP),
    )
}

/// A gauge transformation of the eigenvalue problem.
#[derive(Clone, Debug)]
pub enum GaugeTransform {
    /// `L ↦ e^{−φ/2} L e^{−φ/2}`, `w ↦ e^{−φ} w`.
    Conformal(TrigPoly),
    /// Reference symbol `L̊ ↦ Q L̊ Q*`.
    Su2Reference(MatrixField),
    /// Constant rotation of the reference frame.
    RigidRotation(Mat2),
}

impl GaugeTransform {
    pub fn name(&self) -> &'static str {
        match self {
            GaugeTransform::Conformal(_) => "conformal",
            GaugeTransform::Su2Reference(_) => "su2_reference",
            GaugeTransform::RigidRotation(_) => "rigid_rotation",
        }
    }
}

/// Frames, SO(3) relation, lift and spinor for a symbol against its reference.
#[derive(Clone, Debug)]
pub struct GaugeData {
    pub frame: Frame,
    pub reference_frame: Frame,
    pub rotation: SO3Field,
    pub lift: SU2Field,
    pub spinor: SpinorField,
}

pub fn extract_spinor(
    sym: &PrincipalSymbol,
    reference: &PrincipalSymbol,
    w: &[f64],
    metric: &Metric,
) -> Result<GaugeData> {
    let frame = frame_from_symbol(sym);
    let reference_frame = frame_from_symbol(reference);
    let rotation = relate_frames(&frame, &reference_frame, metric)?;
    let lift = so3_to_su2_lift(&rotation)?;
    let spinor = spinor_from_su2(&lift, w);
    Ok(GaugeData {
        frame,
        reference_frame,
        rotation,
        lift,
        spinor,
    })
}

/// Whether an SU(2)-valued field relates the two symbols.
pub fn same_spin_structure(a: &PrincipalSymbol, b: &PrincipalSymbol, grid: &Grid) -> Result<bool> {
    let metric = crate::symbol::metric_from_symbol(a, grid);
    let rotation = relate_frames(&frame_from_symbol(a), &frame_from_symbol(b), &metric);
    match rotation.and_then(|o| so3_to_su2_lift(&o)) {
        Ok(_) => Ok(true),
        Err(Error::SpinStructureMismatch { .. }) | Err(Error::ChargeMismatch) => Ok(false),
        Err(e) => Err(e),
    }
}
