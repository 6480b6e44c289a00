//! Dense complex linear algebra kernel.
//!
//! Column-stacking vectorization throughout: `vec(M)` stacks the columns of
//! `M` on top of one another, so the identity `vec(A B C) = (Cᵗ ⊗ A) vec(B)`
//! holds with the standard Kronecker product.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use thiserror::Error;

use crate::scalar::Real;

pub type CMatrix<F> = DMatrix<Complex<F>>;
pub type CVector<F> = DVector<Complex<F>>;

/// Relative tolerance below which a matrix is treated as Hermitian and
/// symmetrized before eigendecomposition.
pub const HERMITICITY_RTOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not Hermitian: ||M - M'|| = {defect} exceeds {tol}")]
    NonHermitian { defect: f64, tol: f64 },
    #[error("invalid dimension {0}, need at least {1}")]
    InvalidDimension(usize, usize),
    #[error("non-finite entry at ({0}, {1})")]
    NonFinite(usize, usize),
}

/// Which tensor factor of a bipartite space an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// Permutation matrix interchanging the second and third tensor factors of
/// `C^d ⊗ C^d ⊗ C^d ⊗ C^d`. Orthogonal and involutive.
#[derive(Debug, Clone)]
pub struct SwapMatrix<F: Real> {
    pub dim: usize,
    pub matrix: CMatrix<F>,
}

pub fn check_finite<F: Real>(m: &CMatrix<F>) -> Result<(), LinalgError> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if !z.re.finite() || !z.im.finite() {
                return Err(LinalgError::NonFinite(i, j));
            }
        }
    }
    Ok(())
}

pub fn dagger<F: Real>(m: &CMatrix<F>) -> CMatrix<F> {
    m.adjoint()
}

pub fn identity<F: Real>(n: usize) -> CMatrix<F> {
    CMatrix::<F>::identity(n, n)
}

pub fn from_real_slice<F: Real>(rows: usize, cols: usize, data: &[f64]) -> CMatrix<F> {
    CMatrix::from_row_iterator(rows, cols, data.iter().map(|&x| Complex::new(F::of(x), F::zero())))
}

/// Frobenius norm.
pub fn fnorm<F: Real>(m: &CMatrix<F>) -> F {
    m.norm()
}

/// Hermiticity defect `||M - M'||_F`.
pub fn hermiticity_defect<F: Real>(m: &CMatrix<F>) -> F {
    fnorm(&(m - m.adjoint()))
}

pub fn is_hermitian<F: Real>(m: &CMatrix<F>, tol: F) -> bool {
    m.is_square() && hermiticity_defect(m) <= tol * F::one().max(fnorm(m))
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
///
/// The input is symmetrized `(M + M')/2` when its Hermiticity defect is below
/// `HERMITICITY_RTOL` relative; larger defects are rejected.
pub fn hermitian_eig<F: Real>(m: &CMatrix<F>) -> Result<(DVector<F>, CMatrix<F>), LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::NonSquare { rows: m.nrows(), cols: m.ncols() });
    }
    let scale = F::one().max(fnorm(m));
    let defect = hermiticity_defect(m);
    let tol = F::of(HERMITICITY_RTOL) * scale;
    if defect > tol {
        return Err(LinalgError::NonHermitian { defect: defect.to_f64(), tol: tol.to_f64() });
    }
    let sym = (m + m.adjoint()).scale(F::of(0.5));
    let eig = sym.symmetric_eigen();
    // nalgebra does not guarantee an eigenvalue order
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let vectors = CMatrix::from_columns(
        &order.iter().map(|&k| eig.eigenvectors.column(k).into_owned()).collect::<Vec<_>>(),
    );
    Ok((values, vectors))
}

/// Singular value decomposition `M = U Σ V†`, singular values descending.
pub fn svd<F: Real>(m: &CMatrix<F>) -> (CMatrix<F>, DVector<F>, CMatrix<F>) {
    let s = m.clone().svd(true, true);
    let u = s.u.expect("requested U");
    let v_t = s.v_t.expect("requested V^T");
    (u, s.singular_values, v_t.adjoint())
}

/// Trace norm: sum of singular values. For Hermitian input this reduces to
/// the sum of eigenvalue magnitudes, which is cheaper and more accurate.
pub fn trace_norm<F: Real>(m: &CMatrix<F>) -> Result<F, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::NonSquare { rows: m.nrows(), cols: m.ncols() });
    }
    if is_hermitian(m, F::of(HERMITICITY_RTOL)) {
        let (vals, _) = hermitian_eig(m)?;
        Ok(vals.iter().map(|&l| l.abs()).sum())
    } else {
        let (_, sigma, _) = svd(m);
        Ok(sigma.iter().copied().sum())
    }
}

/// Column-stacking vectorization.
pub fn vec_mat<F: Real>(m: &CMatrix<F>) -> CVector<F> {
    CVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_mat`].
pub fn devec<F: Real>(v: &CVector<F>, rows: usize, cols: usize) -> Result<CMatrix<F>, LinalgError> {
    if v.len() != rows * cols {
        return Err(LinalgError::DimensionMismatch(format!(
            "vector length {} != {rows}*{cols}",
            v.len()
        )));
    }
    Ok(CMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Kronecker product.
pub fn kron<F: Real>(a: &CMatrix<F>, b: &CMatrix<F>) -> CMatrix<F> {
    a.kronecker(b)
}

/// Commutation matrix `U_P` of size d²×d²: `U_P vec(A) = vec(Aᵗ)` and
/// `U_P (A ⊗ B) U_P = B ⊗ A` for d×d blocks.
pub fn commutation_matrix<F: Real>(d: usize) -> CMatrix<F> {
    let mut u = CMatrix::<F>::zeros(d * d, d * d);
    for r in 0..d {
        for c in 0..d {
            // vec(A)[c*d + r] = A[r,c] lands at vec(At)[r*d + c]
            u[(r * d + c, c * d + r)] = Complex::new(F::one(), F::zero());
        }
    }
    u
}

/// `U_{2↔3} = I_d ⊗ U_P ⊗ I_d` acting on `C^{d⁴}`.
pub fn swap_2_3<F: Real>(d: usize) -> Result<SwapMatrix<F>, LinalgError> {
    if d < 2 {
        return Err(LinalgError::InvalidDimension(d, 2));
    }
    let id = identity::<F>(d);
    let matrix = kron(&kron(&id, &commutation_matrix(d)), &id);
    Ok(SwapMatrix { dim: d, matrix })
}

/// Partial trace of a matrix on `C^{d_A} ⊗ C^{d_B}`, keeping the tagged factor.
pub fn partial_trace<F: Real>(
    m: &CMatrix<F>,
    dims: (usize, usize),
    keep: Subsystem,
) -> Result<CMatrix<F>, LinalgError> {
    let (da, db) = dims;
    let n = da * db;
    if m.nrows() != n || m.ncols() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "matrix is {}x{}, dims give {n}",
            m.nrows(),
            m.ncols()
        )));
    }
    match keep {
        Subsystem::A => {
            let mut out = CMatrix::<F>::zeros(da, da);
            for i in 0..da {
                for j in 0..da {
                    let mut s = Complex::new(F::zero(), F::zero());
                    for k in 0..db {
                        s += m[(i * db + k, j * db + k)];
                    }
                    out[(i, j)] = s;
                }
            }
            Ok(out)
        }
        Subsystem::B => {
            let mut out = CMatrix::<F>::zeros(db, db);
            for i in 0..db {
                for j in 0..db {
                    let mut s = Complex::new(F::zero(), F::zero());
                    for k in 0..da {
                        s += m[(k * db + i, k * db + j)];
                    }
                    out[(i, j)] = s;
                }
            }
            Ok(out)
        }
    }
}

/// Blockwise transpose on the chosen factor of `C^{d_A} ⊗ C^{d_B}`.
pub fn partial_transpose<F: Real>(
    m: &CMatrix<F>,
    dims: (usize, usize),
    subsystem: Subsystem,
) -> Result<CMatrix<F>, LinalgError> {
    let (da, db) = dims;
    let n = da * db;
    if m.nrows() != n || m.ncols() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "matrix is {}x{}, dims give {n}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut out = CMatrix::<F>::zeros(n, n);
    for i1 in 0..da {
        for j1 in 0..da {
            for i2 in 0..db {
                for j2 in 0..db {
                    let (r, c) = match subsystem {
                        Subsystem::A => (j1 * db + i2, i1 * db + j2),
                        Subsystem::B => (i1 * db + j2, j1 * db + i2),
                    };
                    out[(r, c)] = m[(i1 * db + i2, j1 * db + j2)];
                }
            }
        }
    }
    Ok(out)
}

/// Applies `f` to the eigenvalues of a Hermitian matrix.
pub fn hermitian_func<F: Real>(
    m: &CMatrix<F>,
    f: impl Fn(F) -> F,
) -> Result<CMatrix<F>, LinalgError> {
    let (vals, vecs) = hermitian_eig(m)?;
    let n = vals.len();
    let mut diag = CMatrix::<F>::zeros(n, n);
    for i in 0..n {
        diag[(i, i)] = Complex::new(f(vals[i]), F::zero());
    }
    Ok(&vecs * diag * vecs.adjoint())
}
