//! Closed-form symbols, gauges and spinors used as fixtures.

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::matrix_field::{pauli, Mat2, MatrixField};
use crate::symbol::PrincipalSymbol;
use crate::trig::TrigPoly;

/// Symbol whose frame turns `turns` times about the third axis as `x³` runs
/// over a period:
/// `[[p₃, e^{i n x³}(p₁ ∓ i p₂)], [e^{−i n x³}(p₁ ± i p₂), −p₃]]`,
/// upper signs unless `flipped`.
pub fn twisted_symbol(turns: i32, flipped: bool) -> PrincipalSymbol {
    let up = TrigPoly::monomial([0, 0, turns], 1.0);
    let down = TrigPoly::monomial([0, 0, -turns], 1.0);
    let s = if flipped { -1.0 } else { 1.0 };
    let i = Complex64::new(0.0, 1.0);
    let l1 = MatrixField::new([[TrigPoly::zero(), up.clone()], [down.clone(), TrigPoly::zero()]]);
    let l2 = MatrixField::new([
        [TrigPoly::zero(), up.scale(-i * s)],
        [down.scale(i * s), TrigPoly::zero()],
    ]);
    let l3 = MatrixField::constant(&pauli(2));
    PrincipalSymbol::new_unchecked([l1, l2, l3])
}

/// The double-turn example symbol.
pub fn example_symbol() -> PrincipalSymbol {
    twisted_symbol(2, false)
}

/// Constant reference `[[p₃, p₁ ∓ i p₂], [p₁ ± i p₂, −p₃]]`.
pub fn pauli_reference(flipped: bool) -> PrincipalSymbol {
    twisted_symbol(0, flipped)
}

/// `diag(e^{i x³}, e^{−i x³})`.
pub fn example_gauge() -> MatrixField {
    MatrixField::new([
        [TrigPoly::monomial([0, 0, 1], 1.0), TrigPoly::zero()],
        [TrigPoly::zero(), TrigPoly::monomial([0, 0, -1], 1.0)],
    ])
}

/// `(e^{−i x³}, 0)`.
pub fn example_spinor() -> [TrigPoly; 2] {
    [TrigPoly::monomial([0, 0, -1], 1.0), TrigPoly::zero()]
}

/// `exp(i θ·s)`.
pub fn constant_su2(t1: f64, t2: f64, t3: f64) -> Mat2 {
    let v = Vector3::new(t1, t2, t3);
    let angle = v.norm();
    if angle == 0.0 {
        return Mat2::identity();
    }
    let n = v / angle;
    let i_sin = Complex64::new(0.0, angle.sin());
    let axis = pauli(0) * Complex64::from(n[0]) + pauli(1) * Complex64::from(n[1]) + pauli(2) * Complex64::from(n[2]);
    Mat2::identity() * Complex64::from(angle.cos()) + axis * i_sin
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix_field::max_abs;

    #[test]
    fn example_symbol_entries() {
        let sym = example_symbol();
        let x = [0.2, 0.9, 1.7];
        let p = [0.3, -1.2, 0.8];
        let e = Complex64::new(0.0, 2.0 * x[2]).exp();
        let expect = Mat2::new(
            Complex64::from(p[2]),
            e * Complex64::new(p[0], -p[1]),
            e.conj() * Complex64::new(p[0], p[1]),
            Complex64::from(-p[2]),
        );
        assert!(max_abs(&(sym.evaluate(x, p) - expect)) < 1e-14);
        assert!(PrincipalSymbol::new(sym.components().clone()).is_ok());
        assert_eq!(pauli_reference(false), PrincipalSymbol::standard_pauli());
    }

    #[test]
    fn constant_su2_is_special_unitary() {
        let q = constant_su2(0.4, -1.3, 2.2);
        assert!(max_abs(&(q * q.adjoint() - Mat2::identity())) < 1e-14);
        assert!((q.determinant() - Complex64::from(1.0)).norm() < 1e-14);
    }
}
