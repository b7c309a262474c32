//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real floating-point scalar (implemented for `f32` and `f64`).
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + LowerExp
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`.
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("f64 representable")
    }

    /// Conversion from a count.
    fn n(k: usize) -> Self {
        Self::from_usize(k).expect("usize representable")
    }

    fn to64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for [`Real::c`].
#[inline]
pub fn c<T: Real>(x: f64) -> T {
    T::c(x)
}
