//! Floating-point scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar type the meshes, operators and solvers are generic over.
///
/// Implemented for `f32` and `f64`. Special functions and dense reference
/// computations run in `f64` internally and are converted back.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant not representable")
    }

    /// Lossless widening to `f64`.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar not convertible to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b) {
        acc += *x * *y;
    }
    acc
}

pub(crate) fn norm2<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// `‖a − b‖ / ‖b‖`, or `‖a‖` when `b` is zero.
pub fn relative_error<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut num = T::zero();
    for (x, y) in a.iter().zip(b) {
        let d = *x - *y;
        num += d * d;
    }
    let den = norm2(b);
    if den > T::zero() {
        num.sqrt() / den
    } else {
        num.sqrt()
    }
}
