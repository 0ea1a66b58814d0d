use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use rustfft::FftNum;

/// Floating point scalar used by the numerical kernels: `f32` or `f64`.
pub trait Real:
    Float + FftNum + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default
{
    /// Lossy conversion from an `f64` literal or statistic.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Real")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
