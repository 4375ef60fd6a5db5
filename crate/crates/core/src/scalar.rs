//! Scalar abstraction for the numeric core.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};
use rustfft::FftNum;

/// Floating-point scalar usable throughout the library.
///
/// Combines the arithmetic surface of [`num_traits::Float`] with the bounds
/// required by the FFT backend and by parallel iteration. Implemented for
/// `f32` and `f64`; `f64` is the intended default and the only type for
/// which the documented tolerances hold.
pub trait Real:
    Float + FromPrimitive + FftNum + Sum<Self> + Display + Debug + Send + Sync + 'static
{
    /// Lossless conversion from `f64` where the target type allows it;
    /// nearest representable value otherwise.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to any Real")
    }

    /// Conversion from usize; panics only for values beyond the mantissa
    /// range, which sample sizes never reach.
    fn from_usize_exact(n: usize) -> Self {
        Self::from_usize(n).expect("sample sizes fit the scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}
