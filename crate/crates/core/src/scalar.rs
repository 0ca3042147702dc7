use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, Num, NumAssign, ToPrimitive};
use rustfft::FftNum;

/// Ring-like scalar for the lattice calculus.
///
/// Exact types such as `num_rational::Ratio<i64>` satisfy this bound, which is
/// what lets the summation-by-parts identities be checked without rounding.
pub trait Scalar: Num + NumAssign + Copy + PartialOrd + Debug + Send + Sync + 'static {}

impl<T> Scalar for T where T: Num + NumAssign + Copy + PartialOrd + Debug + Send + Sync + 'static {}

/// Floating point scalar used by the solvers (`f32` or `f64`).
pub trait Real: Scalar + Float + FftNum + FromPrimitive + ToPrimitive + Sum {
    fn from_f64_lossy(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite f64 converts to a float type")
    }

    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
