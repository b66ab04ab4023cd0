//! Scalar abstraction for the numerical kernels.
//!
//! Everything downstream is generic over [`Real`], so the same code runs at
//! `f32` or `f64`. The quantitative tolerances quoted throughout the crate
//! assume `f64`; `f32` is supported but will not meet them.

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar type the solvers are generic over.
pub trait Real:
    Float + FromPrimitive + NumAssign + std::fmt::Debug + std::fmt::Display + Default + 'static
{
    /// Lift an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal must convert")
    }

    /// Lift a count into `Self`.
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize must convert")
    }

    #[inline]
    fn half(self) -> Self {
        self / Self::lit(2.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}
