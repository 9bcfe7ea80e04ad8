//! Floating-point scalar abstraction shared by the encoder, loss and optimizer.

use std::fmt;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, NumCast, ToPrimitive};

/// Real scalar the numeric kernels are generic over.
///
/// Implemented for `f32` (storage precision of trained models) and `f64`
/// (gradient checks and reference computations).
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
{
    fn of(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("finite f64 converts to scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Dot product with sequential accumulation (left to right).
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[inline]
pub fn l2_norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Scales `a` to unit L2 norm in place. Returns `false` (and leaves `a`
/// untouched) when the norm is zero or not finite.
pub fn normalize_in_place<T: Scalar>(a: &mut [T]) -> bool {
    let n = l2_norm(a);
    if !n.is_finite() || n <= T::zero() {
        return false;
    }
    for x in a.iter_mut() {
        *x /= n;
    }
    true
}

/// Cosine similarity; zero when either side has zero norm.
pub fn cosine<T: Scalar>(a: &[T], b: &[T]) -> T {
    let na = l2_norm(a);
    let nb = l2_norm(b);
    if na <= T::zero() || nb <= T::zero() {
        return T::zero();
    }
    dot(a, b) / (na * nb)
}
