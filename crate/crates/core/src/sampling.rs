//! Seeded random generation of states, unitaries and maps.
//!
//! All samplers draw from a caller-supplied RNG so that every optimizer and
//! property test in the crate is reproducible under a fixed seed.

use nalgebra::DVector;
use num_complex::Complex;
use rand::Rng;

use crate::linalg::{CMatrix, CVector};
use crate::scalar::Real;

fn gauss<F: Real>(rng: &mut impl Rng) -> F {
    // Box-Muller; good enough for sampling workloads at desk scale.
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    F::of((-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos())
}

fn cgauss<F: Real>(rng: &mut impl Rng) -> Complex<F> {
    Complex::new(gauss(rng), gauss(rng))
}

/// Complex Ginibre matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre<F: Real>(rows: usize, cols: usize, rng: &mut impl Rng) -> CMatrix<F> {
    CMatrix::from_fn(rows, cols, |_, _| cgauss(rng))
}

pub fn random_cmatrix<F: Real>(n: usize, rng: &mut impl Rng) -> CMatrix<F> {
    ginibre(n, n, rng)
}

pub fn random_hermitian<F: Real>(n: usize, rng: &mut impl Rng) -> CMatrix<F> {
    let g = ginibre::<F>(n, n, rng);
    (&g + g.adjoint()).scale(F::of(0.5))
}

/// Haar-distributed unitary via QR of a Ginibre matrix with phase fixing.
pub fn random_unitary<F: Real>(n: usize, rng: &mut impl Rng) -> CMatrix<F> {
    let g = ginibre::<F>(n, n, rng);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let modulus = nalgebra::ComplexField::modulus(d);
        let phase = if modulus > F::zero() {
            d / Complex::new(modulus, F::zero())
        } else {
            Complex::new(F::one(), F::zero())
        };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Normalized random pure state vector.
pub fn random_pure<F: Real>(n: usize, rng: &mut impl Rng) -> CVector<F> {
    let mut v = DVector::from_fn(n, |_, _| cgauss::<F>(rng));
    let norm = v.norm();
    v.unscale_mut(norm);
    v
}

/// Full-rank random density matrix `G G† / Tr(G G†)`.
pub fn random_density_matrix<F: Real>(n: usize, rng: &mut impl Rng) -> CMatrix<F> {
    let g = ginibre::<F>(n, n, rng);
    let m = &g * g.adjoint();
    let tr = m.trace();
    m.unscale(tr.re)
}

/// Maximally entangled state vector `(1/√d) Σ |n⟩|n⟩` on `C^d ⊗ C^d`.
pub fn max_entangled<F: Real>(d: usize) -> CVector<F> {
    let mut v = CVector::<F>::zeros(d * d);
    let amp = Complex::new(F::one() / F::of(d as f64).sqrt(), F::zero());
    for n in 0..d {
        v[n * d + n] = amp;
    }
    v
}
