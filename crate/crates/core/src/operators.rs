//! Named operators used by model files and tests.

use num_complex::Complex;

use crate::linalg::CMatrix;
use crate::scalar::Real;

pub fn pauli_x<F: Real>() -> CMatrix<F> {
    let (o, l) = (Complex::new(F::zero(), F::zero()), Complex::new(F::one(), F::zero()));
    CMatrix::from_row_slice(2, 2, &[o, l, l, o])
}

pub fn pauli_y<F: Real>() -> CMatrix<F> {
    let o = Complex::new(F::zero(), F::zero());
    let i = Complex::new(F::zero(), F::one());
    CMatrix::from_row_slice(2, 2, &[o, -i, i, o])
}

pub fn pauli_z<F: Real>() -> CMatrix<F> {
    let o = Complex::new(F::zero(), F::zero());
    let l = Complex::new(F::one(), F::zero());
    CMatrix::from_row_slice(2, 2, &[l, o, o, -l])
}

/// Lowering operator |0><1|.
pub fn sigma_minus<F: Real>() -> CMatrix<F> {
    let o = Complex::new(F::zero(), F::zero());
    let l = Complex::new(F::one(), F::zero());
    CMatrix::from_row_slice(2, 2, &[o, l, o, o])
}

/// Raising operator |1><0|.
pub fn sigma_plus<F: Real>() -> CMatrix<F> {
    let o = Complex::new(F::zero(), F::zero());
    let l = Complex::new(F::one(), F::zero());
    CMatrix::from_row_slice(2, 2, &[o, o, l, o])
}

/// Looks up an operator by the names accepted in model files.
pub fn by_name<F: Real>(name: &str) -> Option<CMatrix<F>> {
    match name {
        "sigma_x" => Some(pauli_x()),
        "sigma_y" => Some(pauli_y()),
        "sigma_z" => Some(pauli_z()),
        "sigma_plus" => Some(sigma_plus()),
        "sigma_minus" => Some(sigma_minus()),
        "identity" => Some(crate::linalg::identity(2)),
        _ => None,
    }
}
