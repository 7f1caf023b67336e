//! Principal symbols of first-order 2×2 operators and the geometry they
//! encode: metric, frame, coframe, topological charge; plus the first-order
//! operator calculus (construction from a symbol, subprincipal symbol,
//! conjugation by a unitary field).

use nalgebra::{Matrix3, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::matrix_field::{pauli, Mat2, MatrixField};
use crate::tolerances;
use crate::trig::TrigPoly;

pub type Mat3 = Matrix3<f64>;

/// Symbols of at most this degree also get an exact coefficient-space metric.
const POLYNOMIAL_METRIC_DEGREE: i32 = 8;

/// `L_prin(x, p) = L^(α)(x) p_α` with trace-free Hermitian `L^(α)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrincipalSymbol {
    components: [MatrixField; 3],
}

impl PrincipalSymbol {
    /// Checks pointwise Hermiticity and trace-freeness in coefficient space.
    pub fn new(components: [MatrixField; 3]) -> Result<Self> {
        for (alpha, c) in components.iter().enumerate() {
            if !c.is_hermitian(1e-10) {
                return Err(Error::Validation(format!("L^({}) is not Hermitian", alpha + 1)));
            }
            if !c.is_trace_free(1e-10) {
                return Err(Error::Validation(format!("L^({}) is not trace-free", alpha + 1)));
            }
        }
        Ok(Self { components })
    }

    pub fn new_unchecked(components: [MatrixField; 3]) -> Self {
        Self { components }
    }

    /// Projects each grid sample onto the trace-free Hermitian matrices and
    /// re-expands.
    pub fn from_grid(grid: &Grid, values: &[Vec<Mat2>; 3]) -> Self {
        let components = [0, 1, 2].map(|a| {
            let projected: Vec<Mat2> = values[a]
                .par_iter()
                .map(|m| {
                    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
                    let t = (h[(0, 0)] + h[(1, 1)]) * 0.5;
                    h - Mat2::identity() * t
                })
                .collect();
            MatrixField::from_grid(grid, &projected, tolerances::REEXPANSION_DROP)
        });
        Self { components }
    }

    /// Constant standard Pauli symbol `L^(α) = s^α`.
    pub fn standard_pauli() -> Self {
        Self::new_unchecked([0, 1, 2].map(|a| MatrixField::constant(&pauli(a))))
    }

    pub fn component(&self, alpha: usize) -> &MatrixField {
        &self.components[alpha]
    }

    pub fn components(&self) -> &[MatrixField; 3] {
        &self.components
    }

    pub fn degree(&self) -> i32 {
        self.components.iter().map(MatrixField::degree).max().unwrap_or(0)
    }

    pub fn evaluate(&self, x: [f64; 3], p: [f64; 3]) -> Mat2 {
        (0..3).fold(Mat2::zeros(), |acc, a| acc + self.components[a].eval(x) * Complex64::new(p[a], 0.0))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new_unchecked(self.components.clone().map(|m| m.scale(c)))
    }

    /// `Q L^(α) Q*` for a unitary field `Q`.
    pub fn conjugate(&self, q: &MatrixField) -> Self {
        let qa = q.adjoint();
        Self::new_unchecked(self.components.clone().map(|m| q.mul(&m).mul(&qa)))
    }

    /// Symbol in the inverted chart `y = -x`: `L'^(α)(y) = -L^(α)(-y)`.
    pub fn invert_coordinates(&self) -> Self {
        Self::new_unchecked(self.components.clone().map(|m| m.reflect().scale(-1.0)))
    }

    pub fn sample(&self, grid: &Grid) -> [Vec<Mat2>; 3] {
        [0, 1, 2].map(|a| self.components[a].sample(grid))
    }

    pub fn max_coefficient_diff(&self, other: &Self) -> f64 {
        (0..3)
            .map(|a| self.components[a].max_coefficient_diff(&other.components[a]))
            .fold(0.0, f64::max)
    }
}

/// Contravariant metric `g^{αβ}` with grid caches of its inverse and density.
#[derive(Clone, Debug)]
pub struct Metric {
    grid: Grid,
    contravariant: Vec<Mat3>,
    covariant: Vec<Mat3>,
    sqrt_det: Vec<f64>,
    polynomial: Option<Box<[[TrigPoly; 3]; 3]>>,
}

impl Metric {
    pub fn from_contravariant(grid: &Grid, contravariant: Vec<Mat3>) -> Self {
        assert_eq!(contravariant.len(), grid.len());
        let covariant: Vec<Mat3> = contravariant
            .par_iter()
            .map(|g| g.try_inverse().unwrap_or_else(|| Mat3::from_element(f64::NAN)))
            .collect();
        let sqrt_det = covariant.par_iter().map(|g| g.determinant().sqrt()).collect();
        Self {
            grid: grid.clone(),
            contravariant,
            covariant,
            sqrt_det,
            polynomial: None,
        }
    }

    pub fn from_covariant(grid: &Grid, covariant: Vec<Mat3>) -> Self {
        let contra = covariant
            .par_iter()
            .map(|g| g.try_inverse().unwrap_or_else(|| Mat3::from_element(f64::NAN)))
            .collect();
        Self::from_contravariant(grid, contra)
    }

    pub fn from_polynomial(grid: &Grid, poly: [[TrigPoly; 3]; 3]) -> Self {
        let s: Vec<Vec<f64>> = poly.iter().flatten().map(|p| p.sample_real(grid)).collect();
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| Mat3::from_fn(|a, b| s[3 * a + b][i]))
            .collect();
        let mut m = Self::from_contravariant(grid, values);
        m.polynomial = Some(Box::new(poly));
        m
    }

    pub fn flat(grid: &Grid) -> Self {
        let poly = [0, 1, 2].map(|a| [0, 1, 2].map(|b| TrigPoly::constant(if a == b { 1.0 } else { 0.0 })));
        Self::from_polynomial(grid, poly)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `g^{αβ}` at each node.
    pub fn contravariant(&self) -> &[Mat3] {
        &self.contravariant
    }

    /// `g_{αβ}` at each node.
    pub fn covariant(&self) -> &[Mat3] {
        &self.covariant
    }

    /// `√det g_{αβ}` at each node.
    pub fn sqrt_det(&self) -> &[f64] {
        &self.sqrt_det
    }

    pub fn polynomial(&self) -> Option<&[[TrigPoly; 3]; 3]> {
        self.polynomial.as_deref()
    }

    /// Smallest eigenvalue of `g^{αβ}` over the grid.
    pub fn min_eigenvalue(&self) -> f64 {
        self.contravariant
            .par_iter()
            .map(|g| SymmetricEigen::new(*g).eigenvalues.min())
            .reduce(|| f64::INFINITY, f64::min)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.contravariant
            .par_iter()
            .map(|g| SymmetricEigen::new(*g).eigenvalues.max())
            .reduce(|| f64::NEG_INFINITY, f64::max)
    }

    /// `max |g_{αβ} g^{βγ} − δ_α^γ|`.
    pub fn inverse_residual(&self) -> f64 {
        self.contravariant
            .par_iter()
            .zip(&self.covariant)
            .map(|(a, b)| (b * a - Mat3::identity()).amax())
            .reduce(|| 0.0, f64::max)
    }

    /// `max |g^{αβ} − h^{αβ}|` over the grid.
    pub fn max_deviation(&self, other: &Metric) -> f64 {
        self.contravariant
            .par_iter()
            .zip(&other.contravariant)
            .map(|(a, b)| (a - b).amax())
            .reduce(|| 0.0, f64::max)
    }

    pub fn max_deviation_from_identity(&self) -> f64 {
        self.contravariant
            .par_iter()
            .map(|a| (a - Mat3::identity()).amax())
            .reduce(|| 0.0, f64::max)
    }
}

/// `g^{αβ} = ½ tr(L^(α) L^(β))`, equivalent to `det L_prin = −g^{αβ}p_α p_β`
/// for trace-free Hermitian 2×2 symbols.
pub fn metric_from_symbol(sym: &PrincipalSymbol, grid: &Grid) -> Metric {
    if sym.degree() <= POLYNOMIAL_METRIC_DEGREE {
        let poly = [0, 1, 2].map(|a| {
            [0, 1, 2].map(|b| sym.component(a).mul(sym.component(b)).trace().re().scale(0.5))
        });
        return Metric::from_polynomial(grid, poly);
    }
    let s = sym.sample(grid);
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| Mat3::from_fn(|a, b| 0.5 * (s[a][i] * s[b][i]).trace().re))
        .collect();
    Metric::from_contravariant(grid, values)
}

/// True iff the smallest eigenvalue of the induced metric over an
/// `n³` grid exceeds `tol`.
pub fn ellipticity_check(sym: &PrincipalSymbol, grid_size: usize, tol: f64) -> bool {
    let grid = Grid::new(grid_size);
    metric_from_symbol(sym, &grid).min_eigenvalue() > tol
}

/// Orthonormal frame `e_j^α`, stored as `vectors[j][α]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    vectors: [[TrigPoly; 3]; 3],
}

impl Frame {
    pub fn new(vectors: [[TrigPoly; 3]; 3]) -> Self {
        Self { vectors }
    }

    pub fn identity() -> Self {
        Self::constant(&Mat3::identity())
    }

    /// Rows of `m` are the vectors `e_j`.
    pub fn constant(m: &Mat3) -> Self {
        Self::new([0, 1, 2].map(|j| [0, 1, 2].map(|a| TrigPoly::constant(m[(j, a)]))))
    }

    pub fn from_grid(grid: &Grid, values: &[Mat3]) -> Self {
        Self::new([0, 1, 2].map(|j| {
            [0, 1, 2].map(|a| {
                let v: Vec<f64> = values.iter().map(|m| m[(j, a)]).collect();
                TrigPoly::from_grid_real(grid, &v, tolerances::REEXPANSION_DROP)
            })
        }))
    }

    pub fn vector(&self, j: usize, alpha: usize) -> &TrigPoly {
        &self.vectors[j][alpha]
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(self.vectors.clone().map(|row| row.map(|p| p.scale(c))))
    }

    /// `e'_j = O_j^k e_k` for a constant matrix `O`.
    pub fn rotate(&self, o: &Mat3) -> Self {
        Self::new([0, 1, 2].map(|j| {
            [0, 1, 2].map(|a| {
                (0..3).fold(TrigPoly::zero(), |acc, k| acc + self.vectors[k][a].scale(o[(j, k)]))
            })
        }))
    }

    /// Rows `e_j`, columns `α`, at each node.
    pub fn sample(&self, grid: &Grid) -> Vec<Mat3> {
        let s: Vec<Vec<f64>> = self.vectors.iter().flatten().map(|p| p.sample_real(grid)).collect();
        (0..grid.len())
            .into_par_iter()
            .map(|i| Mat3::from_fn(|j, a| s[3 * j + a][i]))
            .collect()
    }

    /// Metric for which this frame is orthonormal, `δ^{jk} e_j^α e_k^β`.
    pub fn induced_metric(&self, grid: &Grid) -> Metric {
        let values = self.sample(grid).into_par_iter().map(|e| e.transpose() * e).collect();
        Metric::from_contravariant(grid, values)
    }

    /// `max |g^{αβ} − δ^{jk} e_j^α e_k^β|` on the metric's grid.
    pub fn orthonormality_residual(&self, metric: &Metric) -> f64 {
        self.induced_metric(metric.grid()).max_deviation(metric)
    }

    pub fn max_coefficient_diff(&self, other: &Self) -> f64 {
        self.vectors
            .iter()
            .flatten()
            .zip(other.vectors.iter().flatten())
            .map(|(a, b)| a.max_coefficient_diff(b))
            .fold(0.0, f64::max)
    }
}

/// `e_1^α = Re L^(α)_{12}`, `e_2^α = −Im L^(α)_{12}`, `e_3^α = Re L^(α)_{11}`
/// (row index first).
pub fn frame_from_symbol(sym: &PrincipalSymbol) -> Frame {
    Frame::new([
        [0, 1, 2].map(|a| sym.component(a).entry(0, 1).re()),
        [0, 1, 2].map(|a| -sym.component(a).entry(0, 1).im()),
        [0, 1, 2].map(|a| sym.component(a).entry(0, 0).re()),
    ])
}

/// `L^(α) = e_j^α s^j`.
pub fn symbol_from_frame(frame: &Frame) -> PrincipalSymbol {
    let i = Complex64::new(0.0, 1.0);
    PrincipalSymbol::new_unchecked([0, 1, 2].map(|a| {
        let e1 = frame.vector(0, a);
        let e2 = frame.vector(1, a);
        let e3 = frame.vector(2, a);
        MatrixField::new([
            [e3.clone(), e1 - &e2.scale(i)],
            [e1 + &e2.scale(i), -e3],
        ])
    }))
}

/// Reference symbol built from the symmetric square root of the metric,
/// `e̊_j = D_jj (g^{1/2})_j` with `D = diag(1, c, 1)`, so that it induces the
/// same metric and carries charge `c`.
pub fn reference_from_metric(metric: &Metric, charge: Charge) -> PrincipalSymbol {
    let flip = Mat3::from_diagonal(&nalgebra::Vector3::new(1.0, charge.sign(), 1.0));
    let values: Vec<Mat3> = metric
        .contravariant()
        .par_iter()
        .map(|g| {
            let eig = SymmetricEigen::new(*g);
            let root = eig.eigenvectors
                * Mat3::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()))
                * eig.eigenvectors.transpose();
            flip * root
        })
        .collect();
    symbol_from_frame(&Frame::from_grid(metric.grid(), &values))
}

/// Coframe `e^j_α = δ^{jk} g_{αβ} e_k^β` on the metric's grid (rows `j`).
#[derive(Clone, Debug)]
pub struct CoframeField {
    grid: Grid,
    values: Vec<Mat3>,
}

impl CoframeField {
    pub fn values(&self) -> &[Mat3] {
        &self.values
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `max |e^j_α e_j^β − δ_α^β|`.
    pub fn duality_residual(&self, frame: &Frame) -> f64 {
        let e = frame.sample(&self.grid);
        self.values
            .par_iter()
            .zip(&e)
            .map(|(co, fr)| (co.transpose() * fr - Mat3::identity()).amax())
            .reduce(|| 0.0, f64::max)
    }
}

pub fn coframe(metric: &Metric, frame: &Frame) -> CoframeField {
    let e = frame.sample(metric.grid());
    let values = e.par_iter().zip(metric.covariant()).map(|(e, g)| e * g).collect();
    CoframeField {
        grid: metric.grid().clone(),
        values,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Charge {
    Positive,
    Negative,
}

impl Charge {
    pub fn sign(self) -> f64 {
        match self {
            Charge::Positive => 1.0,
            Charge::Negative => -1.0,
        }
    }

    pub fn value(self) -> i32 {
        self.sign() as i32
    }

    pub fn flip(self) -> Self {
        match self {
            Charge::Positive => Charge::Negative,
            Charge::Negative => Charge::Positive,
        }
    }
}

/// Both charge formulas at every node: the analytic trace
/// `−(i/2) √det g_{αβ} tr(L^(1) L^(2) L^(3))` and `sgn det e_j^α`.
pub fn charge_fields(sym: &PrincipalSymbol, grid: &Grid) -> (Vec<Complex64>, Vec<f64>) {
    let metric = metric_from_symbol(sym, grid);
    let s = sym.sample(grid);
    let analytic = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let t = (s[0][i] * s[1][i] * s[2][i]).trace();
            Complex64::new(0.0, -0.5) * metric.sqrt_det()[i] * t
        })
        .collect();
    let dets = frame_from_symbol(sym)
        .sample(grid)
        .into_par_iter()
        .map(|e| e.determinant().signum())
        .collect();
    (analytic, dets)
}

pub fn topological_charge(sym: &PrincipalSymbol, grid: &Grid) -> Result<Charge> {
    let (analytic, geometric) = charge_fields(sym, grid);
    let sign = geometric[0];
    let mut worst: f64 = 0.0;
    for (a, g) in analytic.iter().zip(&geometric) {
        worst = worst.max((a - g).norm());
        if *g != sign {
            worst = worst.max(2.0);
        }
    }
    if worst.is_nan() || worst > tolerances::CHARGE {
        return Err(Error::ChargeInconsistent { deviation: worst });
    }
    Ok(if sign > 0.0 { Charge::Positive } else { Charge::Negative })
}

/// `L = P^α ∂_α + Q0` with matrix coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator1st {
    pub p: [MatrixField; 3],
    pub q0: MatrixField,
}

impl Operator1st {
    pub fn new(p: [MatrixField; 3], q0: MatrixField) -> Self {
        Self { p, q0 }
    }

    /// `L_prin = i P^α p_α`.
    pub fn principal_symbol(&self) -> PrincipalSymbol {
        PrincipalSymbol::new_unchecked(self.p.clone().map(|p| p.scale(Complex64::new(0.0, 1.0))))
    }

    pub fn add_zero_order(&self, extra: &MatrixField) -> Self {
        Self::new(self.p.clone(), self.q0.add(extra))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(self.p.clone().map(|p| p.scale(c)), self.q0.scale(c))
    }

    pub fn degree(&self) -> i32 {
        self.p.iter().chain(std::iter::once(&self.q0)).map(MatrixField::degree).max().unwrap_or(0)
    }

    pub fn max_coefficient_diff(&self, other: &Self) -> f64 {
        (0..3)
            .map(|a| self.p[a].max_coefficient_diff(&other.p[a]))
            .fold(self.q0.max_coefficient_diff(&other.q0), f64::max)
    }
}

/// Operator with the given principal symbol and zero subprincipal symbol:
/// `P^α = −i L^(α)`, `Q0 = −(i/2) ∂_α L^(α)`.
pub fn operator_from_symbol(sym: &PrincipalSymbol) -> Operator1st {
    let minus_i = Complex64::new(0.0, -1.0);
    let p = [0, 1, 2].map(|a| sym.component(a).scale(minus_i));
    let div = (0..3).fold(MatrixField::zero(), |acc, a| acc.add(&sym.component(a).derivative(a)));
    Operator1st::new(p, div.scale(Complex64::new(0.0, -0.5)))
}

/// `L_sub = Q0 + (i/2) ∂_α (i P^α) = Q0 − ½ ∂_α P^α`.
pub fn subprincipal(op: &Operator1st) -> MatrixField {
    let div = (0..3).fold(MatrixField::zero(), |acc, a| acc.add(&op.p[a].derivative(a)));
    op.q0.sub(&div.scale(0.5))
}

/// Coefficients of `R ∘ L ∘ R*`: `P' = R P R*`, `Q0' = R Q0 R* + R P^α ∂_α R*`.
pub fn conjugate_operator(op: &Operator1st, r: &MatrixField) -> Operator1st {
    let ra = r.adjoint();
    let p = [0, 1, 2].map(|a| r.mul(&op.p[a]).mul(&ra));
    let mut q0 = r.mul(&op.q0).mul(&ra);
    for a in 0..3 {
        q0 = q0.add(&r.mul(&op.p[a]).mul(&ra.derivative(a)));
    }
    Operator1st::new(p, q0)
}

/// Subprincipal symbol of `R L̊ R*` written directly in terms of `R` and the
/// reference symbol: `(i/2)(∂_α R σ^α R* − R σ^α ∂_α R*)`.
pub fn conjugation_subprincipal_closed_form(reference: &PrincipalSymbol, r: &MatrixField) -> MatrixField {
    let ra = r.adjoint();
    let mut acc = MatrixField::zero();
    for a in 0..3 {
        let sigma = reference.component(a);
        let left = r.derivative(a).mul(sigma).mul(&ra);
        let right = r.mul(sigma).mul(&ra.derivative(a));
        acc = acc.add(&left.sub(&right));
    }
    acc.scale(Complex64::new(0.0, 0.5))
}
