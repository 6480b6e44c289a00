//! Shared helpers for unit, integration and acceptance tests.

use num_complex::Complex;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::CMatrix;
use crate::scalar::Real;

pub use crate::operators::{pauli_x, pauli_y, pauli_z, sigma_minus, sigma_plus};
pub use crate::sampling::{
    max_entangled, random_cmatrix, random_density_matrix as random_density, random_hermitian,
    random_pure, random_unitary,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c64(re: f64, im: f64) -> Complex<f64> {
    Complex::new(re, im)
}

/// Projector |ψ⟩⟨ψ| from a state vector.
pub fn projector<F: Real>(psi: &crate::linalg::CVector<F>) -> CMatrix<F> {
    psi * psi.adjoint()
}
