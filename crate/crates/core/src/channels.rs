//! Quantum channels as superoperators on column-stacked density matrices,
//! their Choi matrices and Kraus representations, and the inverse machinery
//! needed to form intermediate maps `E(t, t₁) = E(t, t₀) E(t₁, t₀)⁻¹`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, CMatrix, LinalgError};
use crate::scalar::Real;
use crate::states::DensityMatrix;

/// Relative tolerance on the trace-preservation identity.
pub const TP_TOL: f64 = 1e-9;
/// A map counts as completely positive when the Choi trace-norm defect stays
/// below this.
pub const CP_TOL: f64 = 1e-9;
/// `|det E| < SINGULAR_RTOL · σ_max^{d²}` marks the map as singular.
pub const SINGULAR_RTOL: f64 = 1e-12;
/// Regularization strengths for the Richardson-extrapolated inverse.
pub const REG_EPSILONS: [f64; 3] = [1e-6, 1e-7, 1e-8];
/// Singular values below `PSEUDO_RTOL · σ_max` are dropped by the
/// pseudoinverse.
pub const PSEUDO_RTOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("superoperator must act on d²-dimensional vectors, got size {0}")]
    NotSquareDim(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("map is singular: |det| = {det:.3e} below threshold {threshold:.3e}")]
    SingularMap { det: f64, threshold: f64 },
    #[error("empty Kraus set")]
    EmptyKrausSet,
}

/// How to invert a propagator when forming intermediate maps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InverseStrategy {
    /// Plain inverse; fails with [`ChannelError::SingularMap`] near
    /// singularities.
    #[default]
    Exact,
    /// `(εI + E)⁻¹` at three ε values, Richardson-extrapolated to ε → 0.
    Regularized,
    /// Moore-Penrose pseudoinverse on the support of E.
    Pseudo,
}

/// Linear map on vec'd operators; `matrix` is d² × d², column-stacking
/// convention (`vec(ABC) = (Cᵗ ⊗ A) vec B`).
#[derive(Debug, Clone)]
pub struct Superoperator<F: Real> {
    pub dim: usize,
    pub matrix: CMatrix<F>,
}

impl<F: Real> Superoperator<F> {
    pub fn new(matrix: CMatrix<F>) -> Result<Self, ChannelError> {
        if !matrix.is_square() {
            return Err(LinalgError::NonSquare { rows: matrix.nrows(), cols: matrix.ncols() }.into());
        }
        let n = matrix.nrows();
        let d = (n as f64).sqrt().round() as usize;
        if d * d != n {
            return Err(ChannelError::NotSquareDim(n));
        }
        linalg::check_finite(&matrix)?;
        Ok(Self { dim: d, matrix })
    }

    pub fn identity(d: usize) -> Self {
        Self { dim: d, matrix: linalg::identity(d * d) }
    }

    /// Superoperator of `ρ ↦ Σ_k K_k ρ K_k†`.
    pub fn from_kraus(ops: &[CMatrix<F>]) -> Result<Self, ChannelError> {
        let first = ops.first().ok_or(ChannelError::EmptyKrausSet)?;
        let d = first.nrows();
        let mut m = CMatrix::<F>::zeros(d * d, d * d);
        for k in ops {
            if k.nrows() != d || k.ncols() != d {
                return Err(ChannelError::DimensionMismatch(k.nrows(), d));
            }
            m += linalg::kron(&k.conjugate(), k);
        }
        Self::new(m)
    }

    pub fn from_unitary(u: &CMatrix<F>) -> Result<Self, ChannelError> {
        Self::from_kraus(std::slice::from_ref(u))
    }

    pub fn apply(&self, op: &CMatrix<F>) -> Result<CMatrix<F>, ChannelError> {
        if op.nrows() != self.dim || op.ncols() != self.dim {
            return Err(ChannelError::DimensionMismatch(op.nrows(), self.dim));
        }
        let v = &self.matrix * linalg::vec_mat(op);
        Ok(linalg::devec(&v, self.dim, self.dim)?)
    }

    pub fn apply_density(&self, rho: &DensityMatrix<F>) -> Result<DensityMatrix<F>, ChannelError> {
        Ok(DensityMatrix::new_unchecked(self.apply(&rho.matrix)?))
    }

    /// `self ∘ other`: `other` acts first.
    pub fn compose(&self, other: &Self) -> Result<Self, ChannelError> {
        if self.dim != other.dim {
            return Err(ChannelError::DimensionMismatch(self.dim, other.dim));
        }
        Ok(Self { dim: self.dim, matrix: &self.matrix * &other.matrix })
    }

    /// Frobenius deviation of `vec(I)† E` from `vec(I)†`.
    pub fn tp_defect(&self) -> F {
        let vid = linalg::vec_mat(&linalg::identity::<F>(self.dim));
        (vid.adjoint() * &self.matrix - vid.adjoint()).norm()
    }

    pub fn is_tp(&self) -> bool {
        self.tp_defect() <= F::of(TP_TOL) * F::of(self.dim as f64)
    }

    /// Choi matrix `(E ⊗ id)(|Φ⟩⟨Φ|)`, normalized to unit trace for TP maps,
    /// in system ⊗ ancilla ordering.
    pub fn choi(&self) -> Result<ChoiMatrix<F>, ChannelError> {
        let d = self.dim;
        let s = linalg::swap_2_3::<F>(d)?;
        let ext = &s.matrix * linalg::kron(&self.matrix, &linalg::identity(d * d)) * &s.matrix;
        let phi = crate::sampling::max_entangled::<F>(d);
        let proj = &phi * phi.adjoint();
        let out = ext * linalg::vec_mat(&proj);
        Ok(ChoiMatrix { dim: d, matrix: linalg::devec(&out, d * d, d * d)? })
    }

    pub fn is_cp(&self) -> Result<bool, ChannelError> {
        Ok(self.choi()?.cp_defect()? <= F::of(CP_TOL))
    }

    fn singular_threshold(&self) -> (F, F) {
        let (_, sigma, _) = linalg::svd(&self.matrix);
        let smax = sigma.iter().fold(F::zero(), |a, &s| a.max(s));
        let det_mod = nalgebra::ComplexField::modulus(self.matrix.determinant());
        let mut pow = F::one();
        for _ in 0..(self.dim * self.dim) {
            pow *= smax;
        }
        (det_mod, F::of(SINGULAR_RTOL) * pow)
    }

    pub fn is_singular(&self) -> bool {
        let (det, threshold) = self.singular_threshold();
        det < threshold
    }

    pub fn inverse(&self) -> Result<Self, ChannelError> {
        let (det, threshold) = self.singular_threshold();
        if det < threshold {
            return Err(ChannelError::SingularMap { det: det.to_f64(), threshold: threshold.to_f64() });
        }
        let inv = self
            .matrix
            .clone()
            .try_inverse()
            .ok_or(ChannelError::SingularMap { det: det.to_f64(), threshold: threshold.to_f64() })?;
        Ok(Self { dim: self.dim, matrix: inv })
    }

    /// `(εI + E)⁻¹` for a single regularization strength.
    pub fn regularized_inverse(&self, eps: F) -> Result<Self, ChannelError> {
        let n = self.dim * self.dim;
        let shifted = &self.matrix + linalg::identity::<F>(n).scale(eps);
        let inv = shifted.try_inverse().ok_or(ChannelError::SingularMap {
            det: 0.0,
            threshold: eps.to_f64(),
        })?;
        Ok(Self { dim: self.dim, matrix: inv })
    }

    /// Moore-Penrose pseudoinverse with relative singular-value cutoff.
    pub fn pseudo_inverse(&self) -> Result<Self, ChannelError> {
        let (u, sigma, v) = linalg::svd(&self.matrix);
        let smax = sigma.iter().fold(F::zero(), |a, &s| a.max(s));
        let cutoff = F::of(PSEUDO_RTOL) * smax;
        let n = self.dim * self.dim;
        let mut sinv = CMatrix::<F>::zeros(n, n);
        for i in 0..n {
            if sigma[i] > cutoff {
                sinv[(i, i)] = Complex::new(F::one() / sigma[i], F::zero());
            }
        }
        Ok(Self { dim: self.dim, matrix: v * sinv * u.adjoint() })
    }

    pub fn to_record(&self) -> SuperopRecord {
        let n = self.dim * self.dim;
        let mut elements = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                let z = self.matrix[(r, c)];
                elements.push([z.re.to_f64(), z.im.to_f64()]);
            }
        }
        SuperopRecord { dim: self.dim, elements }
    }

    pub fn from_record(rec: &SuperopRecord) -> Result<Self, ChannelError> {
        let n = rec.dim * rec.dim;
        if rec.elements.len() != n * n {
            return Err(ChannelError::DimensionMismatch(rec.elements.len(), n * n));
        }
        let matrix = CMatrix::from_fn(n, n, |r, c| {
            let [re, im] = rec.elements[r * n + c];
            Complex::new(F::of(re), F::of(im))
        });
        Self::new(matrix)
    }
}

/// Portable superoperator encoding: row-major `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SuperopRecord {
    pub dim: usize,
    pub elements: Vec<[f64; 2]>,
}

/// Choi matrix of a map on a d-dimensional system; d² × d², unit trace for
/// trace-preserving maps.
#[derive(Debug, Clone)]
pub struct ChoiMatrix<F: Real> {
    pub dim: usize,
    pub matrix: CMatrix<F>,
}

impl<F: Real> ChoiMatrix<F> {
    /// `‖C‖₁ − 1`; zero iff the (trace-preserving) map is completely
    /// positive, equal to twice the total negative eigenvalue weight.
    pub fn cp_defect(&self) -> Result<F, ChannelError> {
        Ok(linalg::trace_norm(&self.matrix)? - F::one())
    }

    pub fn is_cp(&self) -> Result<bool, ChannelError> {
        Ok(self.cp_defect()? <= F::of(CP_TOL))
    }

    /// Kraus operators from the eigendecomposition; eigenvalues below
    /// `1e-12` are dropped.
    pub fn kraus(&self) -> Result<KrausSet<F>, ChannelError> {
        let (vals, vecs) = linalg::hermitian_eig(&self.matrix)?;
        let d = self.dim;
        let mut operators = Vec::new();
        for (i, &l) in vals.iter().enumerate() {
            if l <= F::of(1e-12) {
                continue;
            }
            let scale = Complex::new((F::of(d as f64) * l).sqrt(), F::zero());
            let col = vecs.column(i).map(|x| x * scale);
            operators.push(linalg::devec(&col, d, d)?.transpose());
        }
        Ok(KrausSet { dim: d, operators })
    }
}

/// Kraus representation `{K_k}` of a channel.
#[derive(Debug, Clone)]
pub struct KrausSet<F: Real> {
    pub dim: usize,
    pub operators: Vec<CMatrix<F>>,
}

impl<F: Real> KrausSet<F> {
    /// Frobenius deviation of `Σ K†K` from the identity.
    pub fn completeness_defect(&self) -> F {
        let mut s = CMatrix::<F>::zeros(self.dim, self.dim);
        for k in &self.operators {
            s += k.adjoint() * k;
        }
        linalg::fnorm(&(s - linalg::identity::<F>(self.dim)))
    }

    pub fn to_superop(&self) -> Result<Superoperator<F>, ChannelError> {
        Superoperator::from_kraus(&self.operators)
    }
}

/// Superoperator of `E ⊗ id_k` acting on a system of dimension `d·k`
/// (system first, ancilla of dimension `k` second).
pub fn extend_superop<F: Real>(
    e: &Superoperator<F>,
    ancilla_dim: usize,
) -> Result<Superoperator<F>, ChannelError> {
    let d = e.dim;
    let k = ancilla_dim;
    let dk = d * k;
    let mut big = CMatrix::<F>::zeros(dk * dk, dk * dk);
    // (E ⊗ id)(|u,b⟩⟨u',b'|) = E(|u⟩⟨u'|) ⊗ |b⟩⟨b'| and column stacking
    // vec-index((row, col)) = col·dk + row with row = r·k + a, col = r'·k + a'.
    for r in 0..d {
        for rp in 0..d {
            for u in 0..d {
                for up in 0..d {
                    let entry = e.matrix[(rp * d + r, up * d + u)];
                    if entry == Complex::new(F::zero(), F::zero()) {
                        continue;
                    }
                    for a in 0..k {
                        for ap in 0..k {
                            let row_idx = (rp * k + ap) * dk + (r * k + a);
                            let col_idx = (up * k + ap) * dk + (u * k + a);
                            big[(row_idx, col_idx)] = entry;
                        }
                    }
                }
            }
        }
    }
    Superoperator::new(big)
}

/// Intermediate map `E(t, t₁) = E(t, t₀) · E(t₁, t₀)⁻¹` under the chosen
/// inverse strategy.
pub fn intermediate_map<F: Real>(
    e_t: &Superoperator<F>,
    e_t1: &Superoperator<F>,
    strategy: InverseStrategy,
) -> Result<Superoperator<F>, ChannelError> {
    if e_t.dim != e_t1.dim {
        return Err(ChannelError::DimensionMismatch(e_t.dim, e_t1.dim));
    }
    match strategy {
        InverseStrategy::Exact => e_t.compose(&e_t1.inverse()?),
        InverseStrategy::Pseudo => e_t.compose(&e_t1.pseudo_inverse()?),
        InverseStrategy::Regularized => {
            let mut samples = Vec::with_capacity(REG_EPSILONS.len());
            for &eps in REG_EPSILONS.iter() {
                let inv = e_t1.regularized_inverse(F::of(eps))?;
                samples.push((F::of(eps), e_t.compose(&inv)?.matrix));
            }
            // Lagrange extrapolation of the three samples to ε = 0.
            let n = e_t.dim * e_t.dim;
            let mut out = CMatrix::<F>::zeros(n, n);
            for i in 0..samples.len() {
                let mut w = F::one();
                for j in 0..samples.len() {
                    if j != i {
                        w *= -samples[j].0 / (samples[i].0 - samples[j].0);
                    }
                }
                out += samples[i].1.scale(w);
            }
            Superoperator::new(out)
        }
    }
}
