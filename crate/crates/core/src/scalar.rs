//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the scheme is generic over: `f32` or `f64`.
///
/// Tolerances quoted throughout the crate (1e-9 reassembly, 1e-11 pointwise
/// evaluation) assume `f64`; `f32` works but needs looser thresholds.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Sum + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Converts a lattice integer.
    #[inline]
    fn from_int(z: i64) -> Self {
        Self::from_i64(z).expect("integer representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Maximum of an iterator of reals, `-inf` when empty. NaN entries are skipped.
pub fn max_of<T: Real, I: IntoIterator<Item = T>>(it: I) -> T {
    it.into_iter().fold(T::neg_infinity(), |m, x| if x > m { x } else { m })
}
