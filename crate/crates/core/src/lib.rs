//! Characterization, quantification and witnessing of non-Markovianity in
//! quantum (and classical) dynamical processes.
//!
//! The crate is organized around a family of propagators `{E(t_k, t_0)}`
//! produced either by integrating a GKSL-type master equation, from an
//! analytic model, or from a collisional model. Divisibility-based measures
//! (RHP, decay-rate, BLP, Helstrom, k-divisibility) and monotonicity-based
//! witnesses all consume that family.
//!
//! All numerics are generic over the real scalar ([`scalar::Real`]); the
//! `*64` aliases below pin the default double-precision instantiation.

pub mod channels;
pub mod classical;
pub mod dynamics;
pub mod linalg;
pub mod measures;
pub mod operators;
pub mod sampling;
pub mod scalar;
pub mod states;
pub mod testutil;
pub mod witnesses;

pub use scalar::Real;

pub type CMatrix64 = linalg::CMatrix<f64>;
pub type CVector64 = linalg::CVector<f64>;
pub type DensityMatrix64 = states::DensityMatrix<f64>;
pub type Superoperator64 = channels::Superoperator<f64>;
pub type ChoiMatrix64 = channels::ChoiMatrix<f64>;
pub type PropagatorFamily64 = dynamics::PropagatorFamily<f64>;
pub type GkslGenerator64 = dynamics::GkslGenerator<f64>;
