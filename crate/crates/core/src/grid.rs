//! Uniform periodic grids on the 3-torus `[0, 2π)³` and the spectral
//! machinery that lives on them: 3-D FFTs, exact-at-the-nodes
//! differentiation of band-limited samples, and trapezoidal quadrature.
//!
//! Samples are stored in a flat buffer with the third coordinate varying
//! fastest: `idx = (i1 * n + i2) * n + i3`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

/// An `n × n × n` periodic grid with cached FFT plans.
#[derive(Clone)]
pub struct Grid {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("n", &self.n).finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
    }
}

impl Grid {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "grid needs at least two points per axis");
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of nodes, `n³`.
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    /// Largest per-axis frequency a sample on this grid resolves without
    /// folding onto another mode.
    pub fn max_resolved_frequency(&self) -> i32 {
        ((self.n - 1) / 2) as i32
    }

    pub fn index(&self, i: [usize; 3]) -> usize {
        (i[0] * self.n + i[1]) * self.n + i[2]
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx / (n * n), (idx / n) % n, idx % n]
    }

    pub fn point(&self, idx: usize) -> [f64; 3] {
        let h = self.spacing();
        let c = self.coords(idx);
        [c[0] as f64 * h, c[1] as f64 * h, c[2] as f64 * h]
    }

    /// Index of the node one step along `axis` (periodic).
    pub fn neighbor(&self, idx: usize, axis: usize) -> usize {
        let mut c = self.coords(idx);
        c[axis] = (c[axis] + 1) % self.n;
        self.index(c)
    }

    /// Index of the node at `-x`.
    pub fn reflected(&self, idx: usize) -> usize {
        let n = self.n;
        let c = self.coords(idx);
        self.index([(n - c[0]) % n, (n - c[1]) % n, (n - c[2]) % n])
    }

    /// Signed frequency stored at FFT slot `i`. The Nyquist slot of an even
    /// grid is reported as `-n/2`.
    pub fn frequency(&self, i: usize) -> i32 {
        let n = self.n as i64;
        let i = i as i64;
        let k = if 2 * i < n { i } else { i - n };
        k as i32
    }

    /// FFT slot holding frequency `k` (with folding).
    pub fn slot(&self, k: i32) -> usize {
        k.rem_euclid(self.n as i32) as usize
    }

    pub fn is_nyquist(&self, i: usize) -> bool {
        self.n % 2 == 0 && 2 * i == self.n
    }

    pub fn sample<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn([f64; 3]) -> f64 + Sync,
    {
        (0..self.len()).into_par_iter().map(|i| f(self.point(i))).collect()
    }

    pub fn sample_complex<F>(&self, f: F) -> Vec<Complex64>
    where
        F: Fn([f64; 3]) -> Complex64 + Sync,
    {
        (0..self.len()).into_par_iter().map(|i| f(self.point(i))).collect()
    }

    fn fft_axis(&self, data: &mut [Complex64], axis: usize, inverse: bool) {
        let n = self.n;
        let plan = if inverse { &self.inverse } else { &self.forward };
        match axis {
            2 => data.par_chunks_mut(n).for_each(|line| plan.process(line)),
            1 => data.par_chunks_mut(n * n).for_each(|slab| {
                let mut line = vec![Complex64::default(); n];
                for i3 in 0..n {
                    for i2 in 0..n {
                        line[i2] = slab[i2 * n + i3];
                    }
                    plan.process(&mut line);
                    for i2 in 0..n {
                        slab[i2 * n + i3] = line[i2];
                    }
                }
            }),
            _ => {
                // Transpose so that the first axis is contiguous.
                let mut t = vec![Complex64::default(); data.len()];
                t.par_chunks_mut(n).enumerate().for_each(|(row, line)| {
                    for (i1, v) in line.iter_mut().enumerate() {
                        *v = data[i1 * n * n + row];
                    }
                });
                t.par_chunks_mut(n).for_each(|line| plan.process(line));
                data.par_chunks_mut(n * n).enumerate().for_each(|(i1, slab)| {
                    for (row, v) in slab.iter_mut().enumerate() {
                        *v = t[row * n + i1];
                    }
                });
            }
        }
    }

    fn fft3(&self, data: &mut [Complex64], inverse: bool) {
        assert_eq!(data.len(), self.len());
        for axis in 0..3 {
            self.fft_axis(data, axis, inverse);
        }
    }

    /// Fourier coefficients `c_k = n⁻³ Σ f(x) e^{-ik·x}` in FFT slot order.
    pub fn to_coefficients(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut data = values.to_vec();
        self.fft3(&mut data, false);
        let scale = 1.0 / self.len() as f64;
        data.par_iter_mut().for_each(|v| *v *= scale);
        data
    }

    /// Inverse of [`Grid::to_coefficients`]: `f(x) = Σ c_k e^{ik·x}`.
    pub fn from_coefficients(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut data = coeffs.to_vec();
        self.fft3(&mut data, true);
        data
    }

    fn differentiate_coefficients(&self, coeffs: &[Complex64], axis: usize) -> Vec<Complex64> {
        let mut out = coeffs.to_vec();
        out.par_iter_mut().enumerate().for_each(|(idx, c)| {
            let slot = self.coords(idx)[axis];
            if self.is_nyquist(slot) {
                *c = Complex64::default();
            } else {
                *c *= Complex64::new(0.0, self.frequency(slot) as f64);
            }
        });
        out
    }

    /// Spectral derivative along `axis` (Nyquist mode discarded).
    pub fn derivative(&self, values: &[Complex64], axis: usize) -> Vec<Complex64> {
        let coeffs = self.to_coefficients(values);
        self.from_coefficients(&self.differentiate_coefficients(&coeffs, axis))
    }

    pub fn gradient(&self, values: &[Complex64]) -> [Vec<Complex64>; 3] {
        let coeffs = self.to_coefficients(values);
        [0, 1, 2].map(|axis| self.from_coefficients(&self.differentiate_coefficients(&coeffs, axis)))
    }

    pub fn gradient_real(&self, values: &[f64]) -> [Vec<f64>; 3] {
        let c: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.gradient(&c).map(|d| d.into_iter().map(|z| z.re).collect())
    }

    /// Trapezoidal rule over the torus with compensated summation, so the
    /// result does not depend on thread scheduling.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.len());
        let mut sum = 0.0_f64;
        let mut comp = 0.0_f64;
        for &v in values {
            let t = sum + v;
            if sum.abs() >= v.abs() {
                comp += (sum - t) + v;
            } else {
                comp += (v - t) + sum;
            }
            sum = t;
        }
        let h = self.spacing();
        (sum + comp) * h * h * h
    }
}

/// Volume of the torus, `(2π)³`.
pub fn torus_volume() -> f64 {
    (2.0 * PI).powi(3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip() {
        let g = Grid::new(5);
        for idx in 0..g.len() {
            assert_eq!(g.index(g.coords(idx)), idx);
        }
        assert_eq!(g.reflected(0), 0);
        assert_eq!(g.coords(g.reflected(g.index([1, 2, 4]))), [4, 3, 1]);
    }

    #[test]
    fn coefficients_of_plane_wave() {
        let g = Grid::new(8);
        let v = g.sample_complex(|x| Complex64::new(0.0, x[0] - 2.0 * x[2]).exp());
        let c = g.to_coefficients(&v);
        let slot = g.index([g.slot(1), 0, g.slot(-2)]);
        for (i, z) in c.iter().enumerate() {
            let expect = if i == slot { 1.0 } else { 0.0 };
            assert!((z - expect).norm() < 1e-13);
        }
        let back = g.from_coefficients(&c);
        for (a, b) in back.iter().zip(&v) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        // second-order central differences on a 64-point axis, O(h²)
        let g = Grid::new(64);
        let f = |x: [f64; 3]| (x[0].sin() * (2.0 * x[1]).cos() + 0.3 * (x[2] - x[0]).cos()).exp();
        let v: Vec<f64> = g.sample(f);
        let grad = g.gradient_real(&v);
        let h = g.spacing();
        for axis in 0..3 {
            let mut worst = 0.0_f64;
            for idx in (0..g.len()).step_by(97) {
                let x = g.point(idx);
                let mut xp = x;
                let mut xm = x;
                xp[axis] += h;
                xm[axis] -= h;
                let fd = (f(xp) - f(xm)) / (2.0 * h);
                worst = worst.max((fd - grad[axis][idx]).abs());
            }
            assert!(worst < 10.0 * h * h, "axis {axis}: {worst}");
        }
    }

    #[test]
    fn trapezoid_is_exact_for_trig_polynomials() {
        let g = Grid::new(12);
        let v = g.sample(|x| 2.0 + x[0].cos() * x[1].sin() + (3.0 * x[2]).cos());
        assert!((g.integrate(&v) - 2.0 * torus_volume()).abs() < 1e-10);
    }
}
