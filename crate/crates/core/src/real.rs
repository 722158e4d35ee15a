use core::fmt::{Debug, Display};
use core::iter::Sum;
use core::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;

/// Floating-point scalar the kernels are generic over.
///
/// Production code runs on `f32`; `f64` instantiations exist so gradient
/// checks can use finite differences without drowning in rounding noise.
pub trait Real:
    Float
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Transcendentals routed through `libm` so results do not change when some
/// other crate in the build turns on `num-traits/std`.
pub(crate) mod math {
    use super::Real;

    pub fn exp<T: Real>(x: T) -> T {
        T::of(libm::exp(x.as_f64()))
    }

    pub fn ln<T: Real>(x: T) -> T {
        T::of(libm::log(x.as_f64()))
    }

    pub fn sin(x: f64) -> f64 {
        libm::sin(x)
    }

    pub fn cos(x: f64) -> f64 {
        libm::cos(x)
    }
}
