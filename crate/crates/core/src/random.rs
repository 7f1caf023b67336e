//! Seeded generators for randomized property suites.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::catalog::constant_su2;
use crate::grid::Grid;
use crate::matrix_field::{Mat2, MatrixField};
use crate::symbol::{symbol_from_frame, Frame, Mat3, PrincipalSymbol};
use crate::trig::{Freq, TrigPoly};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn frequency<R: Rng>(rng: &mut R, degree: i32) -> Freq {
    loop {
        let k = [0; 3].map(|_| rng.gen_range(-degree..=degree));
        if k != [0, 0, 0] {
            return k;
        }
    }
}

/// Real trigonometric polynomial with `terms` random modes of degree at most
/// `degree` and `sup |p| ≤ amplitude`.
pub fn real_poly<R: Rng>(rng: &mut R, degree: i32, terms: usize, amplitude: f64) -> TrigPoly {
    let mut raw: Vec<(Freq, f64, f64)> = (0..terms)
        .map(|_| (frequency(rng, degree), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let total: f64 = raw.iter().map(|(_, a, b)| a.hypot(*b)).sum();
    let scale = if total > 0.0 { amplitude / total } else { 0.0 };
    raw.iter_mut().fold(TrigPoly::zero(), |acc, (k, a, b)| acc + TrigPoly::cos_sin(*k, *a * scale, *b * scale))
}

/// Charge +1 frame `I + P(x)` with degree ≤ `degree` entries, rejected
/// until `det` stays above ½ on a check grid.
pub fn frame<R: Rng>(rng: &mut R, degree: i32, amplitude: f64) -> Frame {
    let check = Grid::new((2 * degree as usize + 1).max(8) * 2);
    let mut amp = amplitude;
    loop {
        let vectors = [0, 1, 2].map(|j| {
            [0, 1, 2].map(|a| {
                let base = if j == a { 1.0 } else { 0.0 };
                TrigPoly::constant(base) + real_poly(rng, degree, 2, amp)
            })
        });
        let f = Frame::new(vectors);
        if f.sample(&check).iter().all(|e: &Mat3| e.determinant() > 0.5) {
            return f;
        }
        amp *= 0.8;
    }
}

pub fn symbol<R: Rng>(rng: &mut R, degree: i32, amplitude: f64) -> PrincipalSymbol {
    symbol_from_frame(&frame(rng, degree, amplitude))
}

/// `1 + p(x)` with `sup |p| ≤ amplitude < 1`.
pub fn weight<R: Rng>(rng: &mut R, degree: i32, amplitude: f64) -> TrigPoly {
    TrigPoly::constant(1.0) + real_poly(rng, degree, 3, amplitude)
}

pub fn su2<R: Rng>(rng: &mut R) -> Mat2 {
    let t = [0; 3].map(|_| rng.gen_range(-PI..PI));
    constant_su2(t[0], t[1], t[2])
}

/// Smooth special-unitary trigonometric field `C₁ diag(e^{ik·x}, e^{−ik·x}) C₂`.
pub fn su2_field<R: Rng>(rng: &mut R, degree: i32) -> MatrixField {
    let k = frequency(rng, degree);
    let d = MatrixField::new([
        [TrigPoly::monomial(k, Complex64::from(1.0)), TrigPoly::zero()],
        [TrigPoly::zero(), TrigPoly::monomial(k.map(|c| -c), Complex64::from(1.0))],
    ]);
    MatrixField::constant(&su2(rng)).mul(&d).mul(&MatrixField::constant(&su2(rng)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix_field::max_abs;
    use crate::symbol::{topological_charge, Charge};

    #[test]
    fn generators_respect_their_contracts() {
        let mut r = rng(7);
        let g = Grid::new(16);
        for _ in 0..5 {
            let s = symbol(&mut r, 2, 0.3);
            assert!(s.degree() <= 2);
            assert_eq!(topological_charge(&s, &g).unwrap(), Charge::Positive);
            let w = weight(&mut r, 2, 0.4);
            assert!(w.sample_real(&g).iter().all(|v| *v >= 0.6 - 1e-12));
            let q = su2_field(&mut r, 2);
            for m in q.sample(&g).iter().step_by(13) {
                assert!(max_abs(&(m * m.adjoint() - Mat2::identity())) < 1e-13);
                assert!((m.determinant() - 1.0).norm() < 1e-13);
            }
        }
        let a = real_poly(&mut rng(3), 2, 4, 0.3);
        let b = real_poly(&mut rng(3), 2, 4, 0.3);
        assert_eq!(a, b);
        assert!(a.sample_real(&g).iter().all(|v| v.abs() <= 0.3 + 1e-12));
    }
}
