//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All kernels, correlations, solves and determinants are written once against
//! [`Scalar`]. `f64` is the everyday instantiation, [`DoubleDouble`] is the
//! extended-precision one used when Gram systems become ill-conditioned, and
//! `f32` is supported for cheap previews.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::Neg;

use num_traits::{Num, NumAssignOps};

use crate::dd::DoubleDouble;

pub trait Scalar:
    Num + NumAssignOps + Neg<Output = Self> + Copy + PartialOrd + Debug + Display + Sum + Send + Sync + 'static
{
    /// Short label used in reports.
    const LABEL: &'static str;

    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn from_i64(v: i64) -> Self;
    /// Unit roundoff of the representation.
    fn epsilon() -> f64;
    fn exp(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn is_finite(self) -> bool;
    fn pi() -> Self;

    #[inline]
    fn from_usize(v: usize) -> Self {
        Self::from_i64(v as i64)
    }

    #[inline]
    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    #[inline]
    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    #[inline]
    fn signum_of(self) -> Self {
        if self > Self::zero() {
            Self::one()
        } else if self < Self::zero() {
            -Self::one()
        } else {
            Self::zero()
        }
    }
}

macro_rules! impl_native {
    ($t:ty, $label:expr) => {
        impl Scalar for $t {
            const LABEL: &'static str = $label;

            #[inline]
            fn from_f64(v: f64) -> Self {
                v as $t
            }
            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }
            #[inline]
            fn from_i64(v: i64) -> Self {
                v as $t
            }
            #[inline]
            fn epsilon() -> f64 {
                <$t>::EPSILON as f64 / 2.0
            }
            #[inline]
            fn exp(self) -> Self {
                <$t>::exp(self)
            }
            #[inline]
            fn sqrt(self) -> Self {
                <$t>::sqrt(self)
            }
            #[inline]
            fn abs(self) -> Self {
                <$t>::abs(self)
            }
            #[inline]
            fn powi(self, n: i32) -> Self {
                <$t>::powi(self, n)
            }
            #[inline]
            fn is_finite(self) -> bool {
                <$t>::is_finite(self)
            }
            #[inline]
            fn pi() -> Self {
                std::f64::consts::PI as $t
            }
        }
    };
}

impl_native!(f32, "f32");
impl_native!(f64, "f64");

impl Scalar for DoubleDouble {
    const LABEL: &'static str = "double-double";

    #[inline]
    fn from_f64(v: f64) -> Self {
        DoubleDouble::from_f64(v)
    }
    #[inline]
    fn to_f64(self) -> f64 {
        DoubleDouble::to_f64(self)
    }
    #[inline]
    fn from_i64(v: i64) -> Self {
        DoubleDouble::from_i64(v)
    }
    #[inline]
    fn epsilon() -> f64 {
        DoubleDouble::epsilon()
    }
    #[inline]
    fn exp(self) -> Self {
        DoubleDouble::exp(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        DoubleDouble::sqrt(self)
    }
    #[inline]
    fn abs(self) -> Self {
        DoubleDouble::abs(self)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        DoubleDouble::powi(self, n)
    }
    #[inline]
    fn is_finite(self) -> bool {
        DoubleDouble::is_finite(self)
    }
    #[inline]
    fn pi() -> Self {
        DoubleDouble::pi()
    }
}

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug)]
pub struct CompensatedSum<T> {
    sum: T,
    comp: T,
}

impl<T: Scalar> Default for CompensatedSum<T> {
    fn default() -> Self {
        Self {
            sum: T::zero(),
            comp: T::zero(),
        }
    }
}

impl<T: Scalar> CompensatedSum<T> {
    #[inline]
    pub fn add(&mut self, v: T) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> T {
        self.sum + self.comp
    }
}

pub fn compensated_sum<T: Scalar, I: IntoIterator<Item = T>>(it: I) -> T {
    let mut acc = CompensatedSum::default();
    for v in it {
        acc.add(v);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_cancelled_terms() {
        let vals = [1.0, 1e100, 1.0, -1e100];
        let naive: f64 = vals.iter().sum();
        assert_eq!(naive, 0.0);
        assert_eq!(compensated_sum(vals.iter().copied()), 2.0);
    }

    #[test]
    fn unit_roundoff_ordering() {
        assert!(<DoubleDouble as Scalar>::epsilon() < <f64 as Scalar>::epsilon());
        assert!(<f64 as Scalar>::epsilon() < <f32 as Scalar>::epsilon());
    }
}
