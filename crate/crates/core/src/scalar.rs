//! Floating-point abstraction shared by the deterministic numerics.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

/// Real scalar used by grids, kernels, integrators and the HJ schemes: `f32` or `f64`.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; every literal in the numerics goes through here.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(v).expect("f64 is representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("finite conversion to f64")
    }

    #[inline]
    fn of_usize(v: usize) -> Self {
        <Self as num_traits::FromPrimitive>::from_usize(v).expect("usize is representable")
    }

    #[inline]
    fn of_i64(v: i64) -> Self {
        <Self as num_traits::FromPrimitive>::from_i64(v).expect("i64 is representable")
    }

    /// Largest argument `x` with `exp(x)` finite.
    #[inline]
    fn max_exp_arg() -> Self {
        Self::max_value().ln()
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::Real;

    #[test]
    fn exp_range_is_finite_at_the_edge() {
        assert!(f64::max_exp_arg().exp().is_finite());
        assert!(f32::max_exp_arg().is_finite());
        assert!((f32::max_exp_arg() * 0.999).exp().is_finite());
    }
}
