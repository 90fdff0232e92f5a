//! Floating-point scalar used by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::{Product, Sum};

use num_traits::{Float, FromPrimitive, NumCast};

/// f32 or f64.
pub trait Scalar:
    Float + FromPrimitive + NumCast + Debug + Display + Default + Sum + Product + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal or statistic.
    fn of(v: f64) -> Self {
        <Self as NumCast>::from(v).unwrap_or_else(Self::nan)
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `a` and `b` agree to `rel` relative tolerance (absolute near zero).
pub fn approx_eq<T: Scalar>(a: T, b: T, rel: f64) -> bool {
    let (a, b) = (a.as_f64(), b.as_f64());
    if a == b {
        return true;
    }
    let scale = a.abs().max(b.abs()).max(1.0);
    (a - b).abs() <= rel * scale
}
