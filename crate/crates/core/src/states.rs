//! Quantum states, distances, entropies and the one-shot discrimination
//! formula.
//!
//! Entropic quantities use the natural logarithm internally; convert reports
//! with [`LogBase::from_nats`] when base-2 output is wanted.

use nalgebra::DVector;
use num_complex::Complex;
use thiserror::Error;

use crate::linalg::{self, CMatrix, LinalgError};
use crate::scalar::Real;

/// Absolute tolerance on the unit-trace constraint.
pub const TRACE_TOL: f64 = 1e-9;
/// Eigenvalues in `[-EIG_CLIP, 0)` are clipped to zero before logs and square
/// roots; anything more negative fails validation.
pub const EIG_CLIP: f64 = 1e-9;
/// Support-inclusion thresholds for the relative entropy.
pub const SUPPORT_KER_TOL: f64 = 1e-12;
pub const SUPPORT_WEIGHT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum StateError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("trace is {0}, expected 1")]
    NotUnitTrace(f64),
    #[error("matrix has negative eigenvalue {0}")]
    NotPositive(f64),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("mixing probability q = {0} outside [0, 1]")]
    InvalidBias(f64),
}

/// Logarithm base for entropic reports.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Natural,
    Two,
}

impl LogBase {
    /// Converts a value computed in nats into this base.
    pub fn from_nats<F: Real>(self, x: F) -> F {
        match self {
            LogBase::Natural => x,
            LogBase::Two => x / F::of(std::f64::consts::LN_2),
        }
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone)]
pub struct DensityMatrix<F: Real> {
    pub dim: usize,
    pub matrix: CMatrix<F>,
}

impl<F: Real> DensityMatrix<F> {
    pub fn new(matrix: CMatrix<F>) -> Result<Self, StateError> {
        linalg::check_finite(&matrix)?;
        let (vals, _) = linalg::hermitian_eig(&matrix)?;
        let tr = matrix.trace().re;
        if (tr - F::one()).abs() > F::of(TRACE_TOL) {
            return Err(StateError::NotUnitTrace(tr.to_f64()));
        }
        if vals[0] < -F::of(EIG_CLIP) {
            return Err(StateError::NotPositive(vals[0].to_f64()));
        }
        Ok(Self { dim: matrix.nrows(), matrix })
    }

    /// Skips validation; for states produced by already-validated maps.
    pub fn new_unchecked(matrix: CMatrix<F>) -> Self {
        Self { dim: matrix.nrows(), matrix }
    }

    pub fn pure(psi: &crate::linalg::CVector<F>) -> Self {
        let psi = psi.unscale(psi.norm());
        Self::new_unchecked(&psi * psi.adjoint())
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self::new_unchecked(linalg::identity::<F>(d).unscale(F::of(d as f64)))
    }

    /// Eigenvalues ascending, clipped to be nonnegative.
    pub fn spectrum(&self) -> Result<(DVector<F>, CMatrix<F>), StateError> {
        let (mut vals, vecs) = linalg::hermitian_eig(&self.matrix)?;
        for v in vals.iter_mut() {
            if *v < -F::of(EIG_CLIP) {
                return Err(StateError::NotPositive(v.to_f64()));
            }
            if *v < F::zero() {
                *v = F::zero();
            }
        }
        Ok((vals, vecs))
    }
}

/// Biased difference `Δ = q ρ₁ − (1−q) ρ₂` of two states.
#[derive(Debug, Clone)]
pub struct HelstromMatrix<F: Real> {
    pub q: F,
    pub delta: CMatrix<F>,
}

impl<F: Real> HelstromMatrix<F> {
    pub fn new(q: F, rho1: &DensityMatrix<F>, rho2: &DensityMatrix<F>) -> Result<Self, StateError> {
        if q < F::zero() || q > F::one() {
            return Err(StateError::InvalidBias(q.to_f64()));
        }
        if rho1.dim != rho2.dim {
            return Err(StateError::DimensionMismatch(rho1.dim, rho2.dim));
        }
        let delta = rho1.matrix.scale(q) - rho2.matrix.scale(F::one() - q);
        Ok(Self { q, delta })
    }
}

/// Real coordinates of a state in the orthonormal su(d) basis.
#[derive(Debug, Clone)]
pub struct BlochVector<F: Real> {
    pub dim: usize,
    pub coeffs: DVector<F>,
}

/// Orthonormal Hermitian operator basis: `G₀ = I/√d` plus the d²−1 normalized
/// su(d) generators, with `Tr(Gₘ Gₙ) = δₘₙ`.
#[derive(Debug, Clone)]
pub struct SuBasis<F: Real> {
    pub dim: usize,
    pub g0: CMatrix<F>,
    pub generators: Vec<CMatrix<F>>,
}

pub fn su_basis<F: Real>(d: usize) -> Result<SuBasis<F>, StateError> {
    if d < 2 {
        return Err(StateError::from(LinalgError::InvalidDimension(d, 2)));
    }
    let zero = Complex::new(F::zero(), F::zero());
    let inv_sqrt2 = Complex::new(F::one() / F::of(2.0).sqrt(), F::zero());
    let mut generators = Vec::with_capacity(d * d - 1);
    for i in 0..d {
        for j in (i + 1)..d {
            let mut x = CMatrix::from_element(d, d, zero);
            x[(i, j)] = inv_sqrt2;
            x[(j, i)] = inv_sqrt2;
            generators.push(x);
            let mut y = CMatrix::from_element(d, d, zero);
            y[(i, j)] = Complex::new(F::zero(), -F::one()) * inv_sqrt2;
            y[(j, i)] = Complex::new(F::zero(), F::one()) * inv_sqrt2;
            generators.push(y);
        }
    }
    for l in 1..d {
        let norm = F::one() / (F::of(l as f64) * F::of((l + 1) as f64)).sqrt();
        let mut g = CMatrix::from_element(d, d, zero);
        for k in 0..l {
            g[(k, k)] = Complex::new(norm, F::zero());
        }
        g[(l, l)] = Complex::new(-F::of(l as f64) * norm, F::zero());
        generators.push(g);
    }
    let g0 = linalg::identity::<F>(d).unscale(F::of(d as f64).sqrt());
    Ok(SuBasis { dim: d, g0, generators })
}

/// `D₁ = ‖ρ₁ − ρ₂‖₁ / 2`.
pub fn trace_distance<F: Real>(
    rho1: &DensityMatrix<F>,
    rho2: &DensityMatrix<F>,
) -> Result<F, StateError> {
    if rho1.dim != rho2.dim {
        return Err(StateError::DimensionMismatch(rho1.dim, rho2.dim));
    }
    let tn = linalg::trace_norm(&(&rho1.matrix - &rho2.matrix))?;
    Ok((tn / F::of(2.0)).clamp(F::zero(), F::one()))
}

/// Minimum averaged error probability `(1 − ‖Δ‖₁)/2` in one-shot two-state
/// discrimination with the optimal measurement.
pub fn min_fail_probability<F: Real>(h: &HelstromMatrix<F>) -> Result<F, StateError> {
    let tn = linalg::trace_norm(&h.delta)?;
    Ok(((F::one() - tn) / F::of(2.0)).clamp(F::zero(), F::of(0.5)))
}

fn psd_sqrt<F: Real>(m: &CMatrix<F>) -> Result<CMatrix<F>, StateError> {
    Ok(linalg::hermitian_func(m, |l| {
        if l < F::zero() { F::zero() } else { l.sqrt() }
    })?)
}

/// Uhlmann fidelity `F = [Tr √(√ρ₁ ρ₂ √ρ₁)]²`.
pub fn fidelity<F: Real>(
    rho1: &DensityMatrix<F>,
    rho2: &DensityMatrix<F>,
) -> Result<F, StateError> {
    if rho1.dim != rho2.dim {
        return Err(StateError::DimensionMismatch(rho1.dim, rho2.dim));
    }
    let s1 = psd_sqrt(&rho1.matrix)?;
    let inner = &s1 * &rho2.matrix * &s1;
    let (vals, _) = linalg::hermitian_eig(&inner)?;
    let mut root_sum = F::zero();
    for &l in vals.iter() {
        if l < -F::of(EIG_CLIP) {
            return Err(StateError::NotPositive(l.to_f64()));
        }
        if l > F::zero() {
            root_sum += l.sqrt();
        }
    }
    Ok((root_sum * root_sum).clamp(F::zero(), F::one()))
}

/// `D_B = √(2[1 − √F])`.
pub fn bures_distance<F: Real>(
    rho1: &DensityMatrix<F>,
    rho2: &DensityMatrix<F>,
) -> Result<F, StateError> {
    let f = fidelity(rho1, rho2)?;
    Ok((F::of(2.0) * (F::one() - f.sqrt())).max(F::zero()).sqrt())
}

/// Relative entropy `S(ρ₁‖ρ₂)` in nats; `+∞` when the support of ρ₁ leaks
/// into the kernel of ρ₂.
pub fn relative_entropy<F: Real>(
    rho1: &DensityMatrix<F>,
    rho2: &DensityMatrix<F>,
) -> Result<F, StateError> {
    if rho1.dim != rho2.dim {
        return Err(StateError::DimensionMismatch(rho1.dim, rho2.dim));
    }
    let (p, pv) = rho1.spectrum()?;
    let (q, qv) = rho2.spectrum()?;
    let d = rho1.dim;
    // kernel check first
    for j in 0..d {
        if q[j] < F::of(SUPPORT_KER_TOL) {
            let col = qv.column(j);
            let weight = (col.adjoint() * &rho1.matrix * col)[(0, 0)].re;
            if weight > F::of(SUPPORT_WEIGHT_TOL) {
                return Ok(F::inf());
            }
        }
    }
    let mut s = F::zero();
    for i in 0..d {
        if p[i] > F::zero() {
            s += p[i] * p[i].ln();
        }
    }
    // cross term: -Σ_ij p_i |<ψ_i|φ_j>|² ln q_j over the support of ρ₂
    for j in 0..d {
        if q[j] < F::of(SUPPORT_KER_TOL) {
            continue;
        }
        let col = qv.column(j);
        let weight = (col.adjoint() * &rho1.matrix * col)[(0, 0)].re;
        s -= weight * q[j].ln();
    }
    let _ = pv;
    Ok(s.max(F::zero()))
}

/// Von Neumann entropy `S(ρ) = −Tr(ρ ln ρ)` in nats.
pub fn von_neumann_entropy<F: Real>(rho: &DensityMatrix<F>) -> Result<F, StateError> {
    let (vals, _) = rho.spectrum()?;
    let mut s = F::zero();
    for &l in vals.iter() {
        if l > F::zero() {
            s -= l * l.ln();
        }
    }
    Ok(s.max(F::zero()))
}

/// Bloch coordinates `r_j = Tr(G_j ρ)` in the normalized su(d) basis.
pub fn to_bloch<F: Real>(rho: &DensityMatrix<F>) -> Result<BlochVector<F>, StateError> {
    let basis = su_basis::<F>(rho.dim)?;
    let coeffs = DVector::from_iterator(
        basis.generators.len(),
        basis.generators.iter().map(|g| (g * &rho.matrix).trace().re),
    );
    Ok(BlochVector { dim: rho.dim, coeffs })
}

/// Reconstruction `ρ = I/d + Σ r_j G_j`.
pub fn from_bloch<F: Real>(b: &BlochVector<F>) -> Result<DensityMatrix<F>, StateError> {
    let basis = su_basis::<F>(b.dim)?;
    let mut m = linalg::identity::<F>(b.dim).unscale(F::of(b.dim as f64));
    for (g, &r) in basis.generators.iter().zip(b.coeffs.iter()) {
        m += g.scale(r);
    }
    DensityMatrix::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::fnorm;
    use crate::testutil::{self, c64, projector, rng};
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    fn ket0() -> DensityMatrix<f64> {
        DensityMatrix::new(crate::linalg::from_real_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).unwrap()
    }

    fn ket1() -> DensityMatrix<f64> {
        DensityMatrix::new(crate::linalg::from_real_slice(2, 2, &[0.0, 0.0, 0.0, 1.0])).unwrap()
    }

    fn plus() -> DensityMatrix<f64> {
        DensityMatrix::new(crate::linalg::from_real_slice(2, 2, &[0.5, 0.5, 0.5, 0.5])).unwrap()
    }

    fn minus() -> DensityMatrix<f64> {
        DensityMatrix::new(crate::linalg::from_real_slice(2, 2, &[0.5, -0.5, -0.5, 0.5])).unwrap()
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(crate::linalg::from_real_slice::<f64>(2, 2, &[0.7, 0.0, 0.0, 0.4]))
            .is_err());
        assert!(DensityMatrix::new(crate::linalg::from_real_slice::<f64>(2, 2, &[1.1, 0.0, 0.0, -0.1]))
            .is_err());
    }

    #[test]
    fn density_matrix_trace_norm_one() {
        let mut r = rng(2);
        for _ in 0..5 {
            let rho = testutil::random_density::<f64>(3, &mut r);
            assert_relative_eq!(crate::linalg::trace_norm(&rho).unwrap(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn su_basis_qubit_matches_paulis() {
        let b = su_basis::<f64>(2).unwrap();
        let s2 = std::f64::consts::SQRT_2;
        assert_relative_eq!(fnorm(&(b.generators[0].clone() - testutil::pauli_x::<f64>().unscale(s2))), 0.0, epsilon = 1e-15);
        assert_relative_eq!(fnorm(&(b.generators[1].clone() - testutil::pauli_y::<f64>().unscale(s2))), 0.0, epsilon = 1e-15);
        assert_relative_eq!(fnorm(&(b.generators[2].clone() - testutil::pauli_z::<f64>().unscale(s2))), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn su_basis_orthonormal_d3() {
        let b = su_basis::<f64>(3).unwrap();
        let mut all = vec![b.g0.clone()];
        all.extend(b.generators.iter().cloned());
        assert_eq!(all.len(), 9);
        for (m, gm) in all.iter().enumerate() {
            assert!(m == 0 || gm.trace().norm() < 1e-14, "traceless");
            for (n, gn) in all.iter().enumerate() {
                let ip = (gm.adjoint() * gn).trace().re;
                let expect = if m == n { 1.0 } else { 0.0 };
                assert_relative_eq!(ip, expect, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn su_basis_spans_hermitian() {
        let mut r = rng(4);
        let m = testutil::random_hermitian::<f64>(3, &mut r);
        let b = su_basis::<f64>(3).unwrap();
        let mut rec = b.g0.scale((&b.g0 * &m).trace().re);
        for g in &b.generators {
            rec += g.scale((g * &m).trace().re);
        }
        assert_relative_eq!(fnorm(&(rec - m)), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn trace_distance_examples() {
        assert_relative_eq!(trace_distance(&ket0(), &ket0()).unwrap(), 0.0);
        assert_relative_eq!(trace_distance(&ket0(), &ket1()).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(trace_distance(&plus(), &minus()).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn trace_distance_triangle_inequality() {
        let mut r = rng(8);
        for _ in 0..30 {
            let a = testutil::random_density::<f64>(3, &mut r);
            let a = DensityMatrix::new_unchecked(a);
            let b = DensityMatrix::new_unchecked(testutil::random_density::<f64>(3, &mut r));
            let c = DensityMatrix::new_unchecked(testutil::random_density::<f64>(3, &mut r));
            let dab = trace_distance(&a, &b).unwrap();
            let dbc = trace_distance(&b, &c).unwrap();
            let dac = trace_distance(&a, &c).unwrap();
            assert!(dac <= dab + dbc + 1e-10);
        }
    }

    #[test]
    fn min_fail_probability_examples() {
        let h = HelstromMatrix::new(0.0, &ket0(), &ket1()).unwrap();
        assert_relative_eq!(min_fail_probability(&h).unwrap(), 0.0, epsilon = 1e-12);
        let h = HelstromMatrix::new(1.0, &ket0(), &ket1()).unwrap();
        assert_relative_eq!(min_fail_probability(&h).unwrap(), 0.0, epsilon = 1e-12);
        let h = HelstromMatrix::new(0.5, &ket0(), &ket0()).unwrap();
        assert_relative_eq!(min_fail_probability(&h).unwrap(), 0.5, epsilon = 1e-12);
        let h = HelstromMatrix::new(0.5, &ket0(), &ket1()).unwrap();
        assert_relative_eq!(min_fail_probability(&h).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn helstrom_trace_identity() {
        let mut r = rng(10);
        let rho1 = DensityMatrix::new_unchecked(testutil::random_density::<f64>(2, &mut r));
        let rho2 = DensityMatrix::new_unchecked(testutil::random_density::<f64>(2, &mut r));
        let h = HelstromMatrix::new(0.3, &rho1, &rho2).unwrap();
        assert_relative_eq!(h.delta.trace().re, 2.0 * 0.3 - 1.0, epsilon = 1e-12);
        assert!(HelstromMatrix::new(1.2, &rho1, &rho2).is_err());
    }

    /// Brute-force discrimination oracle: minimum over a grid of qubit
    /// projective effects T = cos²(a/2)-weighted projectors plus T=0, T=I.
    pub(crate) fn brute_force_fail_probability(
        q: f64,
        rho1: &DensityMatrix<f64>,
        rho2: &DensityMatrix<f64>,
        grid: usize,
    ) -> f64 {
        let mut best = f64::INFINITY;
        let eye = crate::linalg::identity::<f64>(2);
        let mut consider = |t: &crate::CMatrix64| {
            let fail = (1.0 - q) * (&rho2.matrix * t).trace().re
                + q * (&rho1.matrix * (&eye - t)).trace().re;
            if fail < best {
                best = fail;
            }
        };
        consider(&crate::CMatrix64::zeros(2, 2));
        consider(&eye);
        for i in 0..grid {
            let theta = std::f64::consts::PI * (i as f64 + 0.5) / grid as f64;
            for j in 0..grid {
                let phi = 2.0 * std::f64::consts::PI * j as f64 / grid as f64;
                let psi = nalgebra::dvector![
                    c64((theta / 2.0).cos(), 0.0),
                    c64((theta / 2.0).sin() * phi.cos(), (theta / 2.0).sin() * phi.sin())
                ];
                consider(&projector(&psi));
            }
        }
        best
    }

    #[test]
    fn min_fail_probability_matches_brute_force() {
        let mut r = rng(12);
        for _ in 0..10 {
            let rho1 = DensityMatrix::new_unchecked(testutil::random_density::<f64>(2, &mut r));
            let rho2 = DensityMatrix::new_unchecked(testutil::random_density::<f64>(2, &mut r));
            let q = 0.5 * rand::Rng::random::<f64>(&mut r);
            let h = HelstromMatrix::new(q, &rho1, &rho2).unwrap();
            let exact = min_fail_probability(&h).unwrap();
            let brute = brute_force_fail_probability(q, &rho1, &rho2, 100);
            assert!((exact - brute).abs() < 1e-3, "exact {exact} vs brute {brute}");
        }
    }

    #[test]
    fn fidelity_examples() {
        assert_relative_eq!(fidelity(&plus(), &plus()).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(fidelity(&ket0(), &ket1()).unwrap(), 0.0, epsilon = 1e-12);
        // dephased |+> and |-> with off-diagonal factor R
        let r_factor = 0.6;
        let rho1 = DensityMatrix::new(crate::linalg::from_real_slice::<f64>(
            2, 2, &[0.5, 0.5 * r_factor, 0.5 * r_factor, 0.5],
        ))
        .unwrap();
        let rho2 = DensityMatrix::new(crate::linalg::from_real_slice(
            2, 2, &[0.5, -0.5 * r_factor, -0.5 * r_factor, 0.5],
        ))
        .unwrap();
        assert_relative_eq!(fidelity(&rho1, &rho2).unwrap(), 1.0 - r_factor * r_factor, epsilon = 1e-10);
    }

    #[test]
    fn fidelity_symmetric_and_bures_monotone() {
        let mut r = rng(14);
        let mut prev: Option<(f64, f64)> = None;
        for _ in 0..20 {
            let a = DensityMatrix::new_unchecked(testutil::random_density::<f64>(2, &mut r));
            let b = DensityMatrix::new_unchecked(testutil::random_density::<f64>(2, &mut r));
            let f = fidelity(&a, &b).unwrap();
            let fr = fidelity(&b, &a).unwrap();
            assert_relative_eq!(f, fr, epsilon = 1e-9);
            let db = bures_distance(&a, &b).unwrap();
            assert_relative_eq!(db * db, 2.0 - 2.0 * f.sqrt(), epsilon = 1e-9);
            if let Some((pf, pdb)) = prev {
                // D_B decreasing iff F increasing
                assert_eq!(f > pf, db < pdb);
            }
            prev = Some((f, db));
        }
    }

    #[test]
    fn relative_entropy_examples() {
        assert_relative_eq!(relative_entropy(&plus(), &plus()).unwrap(), 0.0, epsilon = 1e-10);
        assert!(relative_entropy(&ket0(), &ket1()).unwrap().is_infinite());
        // dephasing pair closed form: S = R ln[(1+R)/(1-R)]
        let rr = 0.4;
        let rho1 = DensityMatrix::new(crate::linalg::from_real_slice::<f64>(
            2, 2, &[0.5, 0.5 * rr, 0.5 * rr, 0.5],
        ))
        .unwrap();
        let rho2 = DensityMatrix::new(crate::linalg::from_real_slice(
            2, 2, &[0.5, -0.5 * rr, -0.5 * rr, 0.5],
        ))
        .unwrap();
        let expect = rr * ((1.0 + rr) / (1.0 - rr)).ln();
        assert_relative_eq!(relative_entropy(&rho1, &rho2).unwrap(), expect, epsilon = 1e-10);
    }

    #[test]
    fn relative_entropy_nonnegative() {
        let mut r = rng(16);
        for _ in 0..20 {
            let a = DensityMatrix::new_unchecked(testutil::random_density::<f64>(3, &mut r));
            let b = DensityMatrix::new_unchecked(testutil::random_density::<f64>(3, &mut r));
            assert!(relative_entropy(&a, &b).unwrap() >= 0.0);
        }
    }

    #[test]
    fn entropy_examples() {
        assert_relative_eq!(von_neumann_entropy(&ket0()).unwrap(), 0.0, epsilon = 1e-12);
        let mixed = DensityMatrix::<f64>::maximally_mixed(2);
        assert_relative_eq!(von_neumann_entropy(&mixed).unwrap(), std::f64::consts::LN_2, epsilon = 1e-12);
        assert_relative_eq!(LogBase::Two.from_nats(von_neumann_entropy(&mixed).unwrap()), 1.0, epsilon = 1e-12);
        let diag = DensityMatrix::new(crate::linalg::from_real_slice::<f64>(2, 2, &[0.75, 0.0, 0.0, 0.25]))
            .unwrap();
        let expect = -(0.75f64.ln() * 0.75 + 0.25f64.ln() * 0.25);
        assert_relative_eq!(von_neumann_entropy(&diag).unwrap(), expect, epsilon = 1e-12);
    }

    #[test]
    fn bloch_round_trip() {
        let mixed = DensityMatrix::<f64>::maximally_mixed(3);
        let b = to_bloch(&mixed).unwrap();
        assert_relative_eq!(b.coeffs.norm(), 0.0, epsilon = 1e-12);

        let b0 = to_bloch(&ket0()).unwrap();
        let expect = dvector![0.0, 0.0, 1.0 / std::f64::consts::SQRT_2];
        assert_relative_eq!((b0.coeffs - expect).norm(), 0.0, epsilon = 1e-12);

        let mut r = rng(18);
        for _ in 0..5 {
            let rho = DensityMatrix::new_unchecked(testutil::random_density::<f64>(3, &mut r));
            let back = from_bloch(&to_bloch(&rho).unwrap()).unwrap();
            assert_relative_eq!(fnorm(&(back.matrix - &rho.matrix)), 0.0, epsilon = 1e-10);
        }
    }
}
