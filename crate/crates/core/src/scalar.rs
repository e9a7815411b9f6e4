//! The numeric abstraction shared by statistics, limits and rate functions.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// Exact rational scalar used by the deterministic adversarial checks.
pub type Exact = Ratio<i64>;

/// Numeric type usable as a statistic value, limit or rate-function value.
///
/// Implemented for `f32`, `f64` and [`Exact`]. Arithmetic on `Exact` is exact,
/// which makes equalities at budget boundaries decidable.
pub trait Scalar:
    Clone + Debug + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// The value `num / den`, exact whenever the type can represent it.
    fn from_ratio(num: i64, den: i64) -> Self;

    /// Converts an integer count.
    fn from_count(count: u64) -> Self;

    /// Nearest representable value to `x` (a continued-fraction approximation
    /// for rationals).
    fn from_f64_lossy(x: f64) -> Self;

    /// Conversion to `f64`, `NaN` if the value is not representable.
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `self` raised to the real power `q`.
    ///
    /// Exact for rationals when `q` is a small non-negative integer, otherwise
    /// computed through `f64`.
    fn powf(&self, q: f64) -> Self;

    /// Whether the value is finite (always true for rationals).
    fn is_finite_scalar(&self) -> bool;
}

macro_rules! impl_float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn from_ratio(num: i64, den: i64) -> Self {
                (num as f64 / den as f64) as $t
            }

            fn from_count(count: u64) -> Self {
                count as $t
            }

            fn from_f64_lossy(x: f64) -> Self {
                x as $t
            }

            fn powf(&self, q: f64) -> Self {
                if q.fract() == 0.0 && q.abs() <= i32::MAX as f64 {
                    <$t>::powi(*self, q as i32)
                } else {
                    <$t>::powf(*self, q as $t)
                }
            }

            fn is_finite_scalar(&self) -> bool {
                <$t>::is_finite(*self)
            }
        }
    };
}

impl_float_scalar!(f32);
impl_float_scalar!(f64);

impl Scalar for Exact {
    fn from_ratio(num: i64, den: i64) -> Self {
        Ratio::new(num, den)
    }

    fn from_count(count: u64) -> Self {
        Ratio::from_integer(count as i64)
    }

    fn from_f64_lossy(x: f64) -> Self {
        Ratio::approximate_float(x).unwrap_or_else(|| Ratio::from_integer(0))
    }

    fn powf(&self, q: f64) -> Self {
        if q.fract() == 0.0 && (0.0..=64.0).contains(&q) {
            num_traits::pow(*self, q as usize)
        } else {
            Self::from_f64_lossy(self.to_f64_lossy().powf(q))
        }
    }

    fn is_finite_scalar(&self) -> bool {
        true
    }
}

/// Total order on scalars that treats incomparable values (`NaN`) as equal.
pub fn cmp_scalar<T: Scalar>(a: &T, b: &T) -> std::cmp::Ordering {
    a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal)
}
