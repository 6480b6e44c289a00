//! Scalar abstraction: all numerics are generic over the real field.
//!
//! Concrete code should use the `*64` aliases at the crate root; `f32` is
//! supported for quick exploratory runs at reduced precision.

use num_traits::FromPrimitive;

/// Real scalar type backing all matrices and tolerances.
pub trait Real: nalgebra::RealField + FromPrimitive + Copy + std::iter::Sum + Default {
    /// Lossy conversion from `f64`, for tolerances and literal constants.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts into any Real")
    }

    fn to_f64(self) -> f64;

    fn finite(self) -> bool;

    fn inf() -> Self;
}

impl Real for f32 {
    fn to_f64(self) -> f64 {
        self as f64
    }

    fn finite(self) -> bool {
        self.is_finite()
    }

    fn inf() -> Self {
        f32::INFINITY
    }
}

impl Real for f64 {
    fn to_f64(self) -> f64 {
        self
    }

    fn finite(self) -> bool {
        self.is_finite()
    }

    fn inf() -> Self {
        f64::INFINITY
    }
}
