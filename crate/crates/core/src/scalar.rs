//! Scalar abstraction shared by the model, the message lattice and the solvers.
//!
//! Everything above this module is written against [`Scalar`], so the same
//! code runs in `f64` for the iterative solvers, in `f32` when memory matters,
//! and in exact rationals ([`Rational64`]) when a comparison has to be decided
//! without rounding (OVM oracle, closed-form threshold checks).

use std::fmt::{Debug, Display};

use num_rational::Rational64;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// Number type the model is generic over.
pub trait Scalar:
    Num + Signed + FromPrimitive + ToPrimitive + PartialOrd + Copy + Debug + Display + Send + Sync + 'static
{
    /// Two utilities closer than this count as tied.
    fn tie_tolerance() -> Self;

    /// Exact conversion of a small integer.
    fn from_int(n: i64) -> Self {
        Self::from_i64(n).expect("small integers are representable in every scalar")
    }

    /// Nearest representable value to `x`. Rationals use a continued-fraction
    /// approximation, so prefer building exact values from integers.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).unwrap_or_else(|| panic!("{x} is not representable"))
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn ratio(num: i64, den: i64) -> Self {
        Self::from_int(num) / Self::from_int(den)
    }
}

impl Scalar for f64 {
    fn tie_tolerance() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn tie_tolerance() -> Self {
        1e-5
    }
}

impl Scalar for Rational64 {
    fn tie_tolerance() -> Self {
        Rational64::from_integer(0)
    }
}

/// Scalars that additionally support the floating-point operations the
/// iterative solver needs.
pub trait Real: Scalar + num_traits::Float {}

impl Real for f64 {}
impl Real for f32 {}
