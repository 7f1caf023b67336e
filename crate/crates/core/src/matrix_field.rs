//! 2×2 matrix fields with trigonometric-polynomial entries.

use nalgebra::Matrix2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::grid::Grid;
use crate::trig::TrigPoly;

pub type Mat2 = Matrix2<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Standard Pauli matrix `s^j`, `j = 1, 2, 3` given as `0, 1, 2`.
pub fn pauli(j: usize) -> Mat2 {
    match j {
        0 => Mat2::new(ZERO, ONE, ONE, ZERO),
        1 => Mat2::new(ZERO, -I, I, ZERO),
        2 => Mat2::new(ONE, ZERO, ZERO, -ONE),
        _ => panic!("Pauli index out of range"),
    }
}

pub fn identity() -> Mat2 {
    Mat2::identity()
}

/// Largest entry modulus.
pub fn max_abs(m: &Mat2) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatrixField {
    entries: [[TrigPoly; 2]; 2],
}

impl MatrixField {
    pub fn new(entries: [[TrigPoly; 2]; 2]) -> Self {
        Self { entries }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(m: &Mat2) -> Self {
        Self::new([
            [TrigPoly::constant(m[(0, 0)]), TrigPoly::constant(m[(0, 1)])],
            [TrigPoly::constant(m[(1, 0)]), TrigPoly::constant(m[(1, 1)])],
        ])
    }

    pub fn identity() -> Self {
        Self::constant(&Mat2::identity())
    }

    /// `p · I`.
    pub fn scalar(p: &TrigPoly) -> Self {
        Self::new([[p.clone(), TrigPoly::zero()], [TrigPoly::zero(), p.clone()]])
    }

    pub fn entry(&self, row: usize, col: usize) -> &TrigPoly {
        &self.entries[row][col]
    }

    pub fn entries(&self) -> &[[TrigPoly; 2]; 2] {
        &self.entries
    }

    fn map(&self, f: impl Fn(&TrigPoly) -> TrigPoly) -> Self {
        Self::new([
            [f(&self.entries[0][0]), f(&self.entries[0][1])],
            [f(&self.entries[1][0]), f(&self.entries[1][1])],
        ])
    }

    fn zip(&self, other: &Self, f: impl Fn(&TrigPoly, &TrigPoly) -> TrigPoly) -> Self {
        let e = |r: usize, c: usize| f(&self.entries[r][c], &other.entries[r][c]);
        Self::new([[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]])
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, c: impl Into<Complex64>) -> Self {
        let c = c.into();
        self.map(|p| p.scale(c))
    }

    pub fn scale_poly(&self, p: &TrigPoly) -> Self {
        self.map(|e| e * p)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let e = |r: usize, c: usize| {
            &self.entries[r][0] * &other.entries[0][c] + &self.entries[r][1] * &other.entries[1][c]
        };
        Self::new([[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]])
    }

    /// Pointwise conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let e = &self.entries;
        Self::new([
            [e[0][0].conj(), e[1][0].conj()],
            [e[0][1].conj(), e[1][1].conj()],
        ])
    }

    pub fn trace(&self) -> TrigPoly {
        &self.entries[0][0] + &self.entries[1][1]
    }

    pub fn derivative(&self, axis: usize) -> Self {
        self.map(|p| p.derivative(axis))
    }

    pub fn reflect(&self) -> Self {
        self.map(TrigPoly::reflect)
    }

    pub fn prune(&self, tol: f64) -> Self {
        self.map(|p| p.prune(tol))
    }

    pub fn truncate(&self, max_degree: i32) -> (Self, f64) {
        let parts = self.entries.clone().map(|row| row.map(|p| p.truncate(max_degree)));
        // entries share the bound; the matrix max-norm is at most 2× the worst entry
        let dropped = parts.iter().flatten().map(|(_, d)| *d).fold(0.0, f64::max);
        let [[(a, _), (b, _)], [(c, _), (d, _)]] = parts;
        (Self::new([[a, b], [c, d]]), 2.0 * dropped)
    }

    pub fn degree(&self) -> i32 {
        self.entries.iter().flatten().map(TrigPoly::degree).max().unwrap_or(0)
    }

    pub fn eval(&self, x: [f64; 3]) -> Mat2 {
        let e = &self.entries;
        Mat2::new(e[0][0].eval(x), e[0][1].eval(x), e[1][0].eval(x), e[1][1].eval(x))
    }

    pub fn max_coefficient_diff(&self, other: &Self) -> f64 {
        self.entries
            .iter()
            .flatten()
            .zip(other.entries.iter().flatten())
            .map(|(a, b)| a.max_coefficient_diff(b))
            .fold(0.0, f64::max)
    }

    /// Coefficient-level check that the field is pointwise Hermitian.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        let e = &self.entries;
        e[0][0].is_real(tol)
            && e[1][1].is_real(tol)
            && e[1][0].max_coefficient_diff(&e[0][1].conj()) <= tol
    }

    /// Entry `(1,1) + (2,2)` vanishes identically.
    pub fn is_trace_free(&self, tol: f64) -> bool {
        self.trace().terms().all(|(_, c)| c.norm() <= tol)
    }

    pub fn sample(&self, grid: &Grid) -> Vec<Mat2> {
        let s: Vec<Vec<Complex64>> = self.entries.iter().flatten().map(|p| p.sample(grid)).collect();
        (0..grid.len())
            .into_par_iter()
            .map(|i| Mat2::new(s[0][i], s[1][i], s[2][i], s[3][i]))
            .collect()
    }

    /// Band-limited re-expansion of grid samples.
    pub fn from_grid(grid: &Grid, values: &[Mat2], drop_below: f64) -> Self {
        let entry = |r: usize, c: usize| {
            let v: Vec<Complex64> = values.iter().map(|m| m[(r, c)]).collect();
            TrigPoly::from_grid(grid, &v, drop_below)
        };
        Self::new([[entry(0, 0), entry(0, 1)], [entry(1, 0), entry(1, 1)]])
    }
}

/// Max over grid nodes of `|A − A*|`, the pointwise Hermiticity defect.
pub fn hermiticity_defect(values: &[Mat2]) -> f64 {
    values
        .par_iter()
        .map(|m| max_abs(&(m - m.adjoint())))
        .reduce(|| 0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_relations() {
        for a in 0..3 {
            for b in 0..3 {
                let anti = pauli(a) * pauli(b) + pauli(b) * pauli(a);
                let expect = if a == b { identity() * Complex64::new(2.0, 0.0) } else { Mat2::zeros() };
                assert!(max_abs(&(anti - expect)) < 1e-15);
            }
        }
        // s¹ s² s³ = i I
        let prod = pauli(0) * pauli(1) * pauli(2);
        assert!(max_abs(&(prod - identity() * I)) < 1e-15);
    }

    #[test]
    fn adjoint_and_product_are_pointwise() {
        let f = MatrixField::new([
            [TrigPoly::cos_sin([1, 0, 0], 1.0, 0.0), TrigPoly::monomial([0, 1, 2], I)],
            [TrigPoly::constant(2.0), TrigPoly::monomial([0, 0, -1], Complex64::new(0.5, 0.5))],
        ]);
        let x = [0.3, 1.1, 2.5];
        let m = f.eval(x);
        assert!(max_abs(&(f.adjoint().eval(x) - m.adjoint())) < 1e-14);
        assert!(max_abs(&(f.mul(&f.adjoint()).eval(x) - m * m.adjoint())) < 1e-13);
        assert!(!f.is_hermitian(1e-12));
        assert!(f.add(&f.adjoint()).is_hermitian(1e-12));
    }

    #[test]
    fn grid_roundtrip() {
        let g = Grid::new(8);
        let f = MatrixField::new([
            [TrigPoly::cos_sin([0, 0, 2], 1.0, 0.0), TrigPoly::monomial([0, 0, 2], ONE)],
            [TrigPoly::monomial([0, 0, -2], ONE), TrigPoly::cos_sin([0, 0, 2], -1.0, 0.0)],
        ]);
        let back = MatrixField::from_grid(&g, &f.sample(&g), 1e-14);
        assert!(back.max_coefficient_diff(&f) < 1e-14);
        assert!(f.is_trace_free(0.0));
    }
}
