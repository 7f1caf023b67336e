//! Trigonometric polynomials on the 3-torus, stored as exact Fourier
//! coefficients `f(x) = Σ_k c_k e^{ik·x}`.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::grid::Grid;

/// Frequency vector `k ∈ ℤ³`.
pub type Freq = [i32; 3];

/// Term-count product above which multiplication goes through an FFT grid
/// instead of direct convolution.
const DIRECT_PRODUCT_LIMIT: usize = 1 << 16;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrigPoly {
    coeffs: BTreeMap<Freq, Complex64>,
}

fn neg_freq(k: Freq) -> Freq {
    [-k[0], -k[1], -k[2]]
}

impl TrigPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: impl Into<Complex64>) -> Self {
        Self::monomial([0, 0, 0], c)
    }

    pub fn monomial(k: Freq, c: impl Into<Complex64>) -> Self {
        let mut p = Self::zero();
        p.add_term(k, c.into());
        p
    }

    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (Freq, Complex64)>,
    {
        let mut p = Self::zero();
        for (k, c) in terms {
            p.add_term(k, c);
        }
        p
    }

    /// `a cos(k·x) + b sin(k·x)`.
    pub fn cos_sin(k: Freq, a: f64, b: f64) -> Self {
        if k == [0, 0, 0] {
            return Self::constant(a);
        }
        // cos = (e^{ikx} + e^{-ikx})/2, sin = (e^{ikx} - e^{-ikx})/(2i)
        let plus = Complex64::new(a / 2.0, -b / 2.0);
        Self::from_terms([(k, plus), (neg_freq(k), plus.conj())])
    }

    pub fn add_term(&mut self, k: Freq, c: Complex64) {
        let e = self.coeffs.entry(k).or_default();
        *e += c;
        if *e == Complex64::default() {
            self.coeffs.remove(&k);
        }
    }

    pub fn coefficient(&self, k: Freq) -> Complex64 {
        self.coeffs.get(&k).copied().unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Freq, &Complex64)> {
        self.coeffs.iter()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Largest `|k_α|` over stored frequencies.
    pub fn degree(&self) -> i32 {
        self.coeffs
            .keys()
            .map(|k| k.iter().map(|v| v.abs()).max().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    pub fn scale(&self, c: impl Into<Complex64>) -> Self {
        let c = c.into();
        Self::from_terms(self.coeffs.iter().map(|(k, v)| (*k, v * c)))
    }

    /// Pointwise complex conjugate: `c'_k = conj(c_{-k})`.
    pub fn conj(&self) -> Self {
        Self::from_terms(self.coeffs.iter().map(|(k, v)| (neg_freq(*k), v.conj())))
    }

    /// Pointwise real part.
    pub fn re(&self) -> Self {
        (self + &self.conj()).scale(0.5)
    }

    /// Pointwise imaginary part.
    pub fn im(&self) -> Self {
        (self - &self.conj()).scale(Complex64::new(0.0, -0.5))
    }

    /// Exact partial derivative: `c_k ↦ i k_axis c_k`.
    pub fn derivative(&self, axis: usize) -> Self {
        Self::from_terms(
            self.coeffs
                .iter()
                .map(|(k, v)| (*k, v * Complex64::new(0.0, k[axis] as f64))),
        )
    }

    /// `f(-x)`.
    pub fn reflect(&self) -> Self {
        Self::from_terms(self.coeffs.iter().map(|(k, v)| (neg_freq(*k), *v)))
    }

    pub fn eval(&self, x: [f64; 3]) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(k, c)| {
                let phase = k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2];
                c * Complex64::from_polar(1.0, phase)
            })
            .sum()
    }

    /// True when `c_{-k} = conj(c_k)` for every stored `k`.
    pub fn is_real(&self, tol: f64) -> bool {
        self.coeffs
            .iter()
            .all(|(k, c)| (self.coefficient(neg_freq(*k)) - c.conj()).norm() <= tol)
    }

    /// Largest coefficient-wise difference.
    pub fn max_coefficient_diff(&self, other: &Self) -> f64 {
        self.coeffs
            .keys()
            .chain(other.coeffs.keys())
            .map(|k| (self.coefficient(*k) - other.coefficient(*k)).norm())
            .fold(0.0, f64::max)
    }

    pub fn l1_norm(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).sum()
    }

    /// Drops every term with `|k_α| > max_degree` on some axis; returns the
    /// kept polynomial and the ℓ¹ mass of what was dropped (a uniform bound
    /// on the pointwise change).
    pub fn truncate(&self, max_degree: i32) -> (Self, f64) {
        let mut kept = Self::zero();
        let mut dropped = 0.0;
        for (k, c) in &self.coeffs {
            if k.iter().all(|v| v.abs() <= max_degree) {
                kept.add_term(*k, *c);
            } else {
                dropped += c.norm();
            }
        }
        (kept, dropped)
    }

    /// Removes coefficients with magnitude at or below `tol`.
    pub fn prune(&self, tol: f64) -> Self {
        Self::from_terms(
            self.coeffs
                .iter()
                .filter(|(_, c)| c.norm() > tol)
                .map(|(k, c)| (*k, *c)),
        )
    }

    /// Values at the grid nodes. Frequencies beyond the grid's band fold onto
    /// their aliases, which is exact at the nodes.
    pub fn sample(&self, grid: &Grid) -> Vec<Complex64> {
        let mut slots = vec![Complex64::default(); grid.len()];
        for (k, c) in &self.coeffs {
            let idx = grid.index([grid.slot(k[0]), grid.slot(k[1]), grid.slot(k[2])]);
            slots[idx] += c;
        }
        grid.from_coefficients(&slots)
    }

    pub fn sample_real(&self, grid: &Grid) -> Vec<f64> {
        self.sample(grid).into_iter().map(|z| z.re).collect()
    }

    /// Band-limited interpolant of grid samples. On even grids the Nyquist
    /// coefficient is split evenly between `±n/2`, which keeps real data
    /// real and reproduces the samples exactly. Coefficients at or below
    /// `drop_below · max|c|` are discarded.
    pub fn from_grid(grid: &Grid, values: &[Complex64], drop_below: f64) -> Self {
        let coeffs = grid.to_coefficients(values);
        let max = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let cutoff = drop_below * max;
        let half = (grid.n() / 2) as i32;
        let mut p = Self::zero();
        for (idx, c) in coeffs.iter().enumerate() {
            if c.norm() <= cutoff {
                continue;
            }
            let slots = grid.coords(idx);
            let mut variants: Vec<(Freq, f64)> = vec![([0, 0, 0], 1.0)];
            for axis in 0..3 {
                let k = grid.frequency(slots[axis]);
                if grid.is_nyquist(slots[axis]) {
                    variants = variants
                        .into_iter()
                        .flat_map(|(mut f, w)| {
                            let mut g = f;
                            f[axis] = -half;
                            g[axis] = half;
                            [(f, w * 0.5), (g, w * 0.5)]
                        })
                        .collect();
                } else {
                    for v in &mut variants {
                        v.0[axis] = k;
                    }
                }
            }
            for (f, w) in variants {
                p.add_term(f, c * w);
            }
        }
        p
    }

    pub fn from_grid_real(grid: &Grid, values: &[f64], drop_below: f64) -> Self {
        let c: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Self::from_grid(grid, &c, drop_below)
    }

    fn mul_direct(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (ka, ca) in &self.coeffs {
            for (kb, cb) in &other.coeffs {
                out.add_term([ka[0] + kb[0], ka[1] + kb[1], ka[2] + kb[2]], ca * cb);
            }
        }
        out
    }

    fn mul_fft(&self, other: &Self) -> Self {
        let degree = self.degree() + other.degree();
        let grid = Grid::new(2 * degree as usize + 2);
        let a = self.sample(&grid);
        let b = other.sample(&grid);
        let prod: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        let scale = self.l1_norm() * other.l1_norm();
        Self::from_grid(&grid, &prod, 0.0).prune(1e-16 * scale)
    }
}

impl From<f64> for TrigPoly {
    fn from(c: f64) -> Self {
        Self::constant(c)
    }
}

impl Add for &TrigPoly {
    type Output = TrigPoly;
    fn add(self, rhs: &TrigPoly) -> TrigPoly {
        let mut out = self.clone();
        for (k, c) in &rhs.coeffs {
            out.add_term(*k, *c);
        }
        out
    }
}

impl Sub for &TrigPoly {
    type Output = TrigPoly;
    fn sub(self, rhs: &TrigPoly) -> TrigPoly {
        let mut out = self.clone();
        for (k, c) in &rhs.coeffs {
            out.add_term(*k, -c);
        }
        out
    }
}

impl Neg for &TrigPoly {
    type Output = TrigPoly;
    fn neg(self) -> TrigPoly {
        self.scale(-1.0)
    }
}

impl Mul for &TrigPoly {
    type Output = TrigPoly;
    fn mul(self, rhs: &TrigPoly) -> TrigPoly {
        if self.len().saturating_mul(rhs.len()) <= DIRECT_PRODUCT_LIMIT {
            self.mul_direct(rhs)
        } else {
            self.mul_fft(rhs)
        }
    }
}

macro_rules! owned_binop {
    ($tr:ident, $f:ident) => {
        impl $tr for TrigPoly {
            type Output = TrigPoly;
            fn $f(self, rhs: TrigPoly) -> TrigPoly {
                (&self).$f(&rhs)
            }
        }
        impl $tr<&TrigPoly> for TrigPoly {
            type Output = TrigPoly;
            fn $f(self, rhs: &TrigPoly) -> TrigPoly {
                (&self).$f(rhs)
            }
        }
    };
}
owned_binop!(Add, add);
owned_binop!(Sub, sub);
owned_binop!(Mul, mul);

impl Neg for TrigPoly {
    type Output = TrigPoly;
    fn neg(self) -> TrigPoly {
        -&self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn cos_sin_evaluates() {
        let p = TrigPoly::cos_sin([0, 0, 2], 1.5, -0.5);
        for x3 in [0.0, 0.3, 1.7, 4.0] {
            let v = p.eval([0.2, 0.1, x3]);
            let expect = 1.5 * (2.0 * x3).cos() - 0.5 * (2.0 * x3).sin();
            assert!((v.re - expect).abs() < 1e-14 && v.im.abs() < 1e-14);
        }
        assert!(p.is_real(0.0));
    }

    #[test]
    fn real_and_imaginary_parts() {
        let p = TrigPoly::monomial([0, 0, 2], c(0.0, 1.0));
        let x = [0.0, 0.0, 0.4];
        let z = p.eval(x);
        assert!((p.re().eval(x).re - z.re).abs() < 1e-15);
        assert!((p.im().eval(x).re - z.im).abs() < 1e-15);
        assert!(p.re().is_real(0.0) && p.im().is_real(0.0));
    }

    #[test]
    fn sample_folds_high_frequencies_exactly() {
        let g = Grid::new(6);
        let p = TrigPoly::from_terms([([5, 0, 0], c(1.0, 0.5)), ([0, -7, 1], c(-0.3, 0.0))]);
        let v = p.sample(&g);
        for idx in (0..g.len()).step_by(7) {
            assert!((v[idx] - p.eval(g.point(idx))).norm() < 1e-12);
        }
    }

    #[test]
    fn from_grid_reproduces_samples_with_nyquist_split() {
        let g = Grid::new(8);
        let v = g.sample(|x| (4.0 * x[0]).cos() + (x[1] + x[2]).sin() * x[0].cos());
        let p = TrigPoly::from_grid_real(&g, &v, 0.0);
        assert!(p.is_real(1e-14));
        let back = p.sample_real(&g);
        for (a, b) in back.iter().zip(&v) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(p.degree(), 4);
    }

    #[test]
    fn fft_product_matches_direct_product() {
        let mut a = TrigPoly::zero();
        let mut b = TrigPoly::zero();
        for i in -6..=6 {
            for j in -6..=6 {
                for l in -2..=2 {
                    let f = (i * 7 + j * 3 + l) as f64;
                    a.add_term([i, j, l], c((0.1 * f).sin(), (0.05 * f).cos()));
                    b.add_term([l, i, j], c((0.2 * f).cos(), 0.0));
                }
            }
        }
        assert!(a.len() * b.len() > DIRECT_PRODUCT_LIMIT);
        let fast = &a * &b;
        let slow = a.mul_direct(&b);
        assert!(fast.max_coefficient_diff(&slow) < 1e-10);
    }

    fn small_poly() -> impl Strategy<Value = TrigPoly> {
        prop::collection::vec(
            ((-3i32..=3, -3i32..=3, -3i32..=3), -1.0f64..1.0, -1.0f64..1.0),
            1..8,
        )
        .prop_map(|terms| {
            TrigPoly::from_terms(terms.into_iter().map(|((a, b, l), re, im)| ([a, b, l], c(re, im))))
        })
    }

    proptest! {
        #[test]
        fn derivative_is_exact(p in small_poly(), axis in 0usize..3, x in prop::array::uniform3(0.0f64..6.283)) {
            // fourth-order central difference against the exact derivative
            let h = 1e-3;
            let mut xs = [x; 4];
            let offs = [2.0, 1.0, -1.0, -2.0];
            for (xi, o) in xs.iter_mut().zip(offs) { xi[axis] += o * h; }
            let fd = (-p.eval(xs[0]) + 8.0 * p.eval(xs[1]) - 8.0 * p.eval(xs[2]) + p.eval(xs[3])) / (12.0 * h);
            prop_assert!((fd - p.derivative(axis).eval(x)).norm() < 1e-6);
        }

        #[test]
        fn product_is_pointwise(a in small_poly(), b in small_poly(), x in prop::array::uniform3(0.0f64..6.283)) {
            let prod = &a * &b;
            prop_assert!((prod.eval(x) - a.eval(x) * b.eval(x)).norm() < 1e-10);
        }

        #[test]
        fn conj_is_pointwise(a in small_poly(), x in prop::array::uniform3(0.0f64..6.283)) {
            prop_assert!((a.conj().eval(x) - a.eval(x).conj()).norm() < 1e-12);
        }
    }
}
