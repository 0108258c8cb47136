use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real number type the classifier and the statistics are computed in.
///
/// Implemented for `f32` and `f64`. Feature extraction always works in
/// `f64`; values are converted with [`Scalar::of`] when they enter the
/// network.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64`.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 converts to every Scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }

    /// Conversion of a count; exact for counts below 2^24 (f32) or 2^53 (f64).
    fn of_count(count: u64) -> Self {
        Self::from_u64(count).expect("u64 converts to every Scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
