//! Double-double arithmetic.
//!
//! A value is the unevaluated sum `hi + lo` of two `f64` with `|lo| <= ulp(hi)/2`,
//! giving roughly 106 bits of significand. The algorithms are the classical
//! error-free transformations (Dekker, Knuth) in the formulation used by the QD
//! library. Only the operations needed by the certificate pipeline are provided:
//! field arithmetic, `sqrt`, `exp`, integer powers and comparisons.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{
    Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, RemAssign, Sub, SubAssign,
};

use num_traits::{Num, One, Zero};

#[derive(Clone, Copy, Default)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

const LN2: DoubleDouble = DoubleDouble {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_558e-17,
};

const PI: DoubleDouble = DoubleDouble {
    hi: std::f64::consts::PI,
    lo: 1.224_646_799_147_353_207e-16,
};

/// 2^-104
const EPS: f64 = 4.930_380_657_631_324e-32;

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };
    pub const ONE: Self = Self { hi: 1.0, lo: 0.0 };

    #[inline]
    pub const fn from_f64(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }

    /// Exact conversion of any `i64`.
    pub fn from_i64(v: i64) -> Self {
        let hi = v as f64;
        let lo = (v as i128 - hi as i128) as f64;
        let (hi, lo) = quick_two_sum(hi, lo);
        Self { hi, lo }
    }

    #[inline]
    pub fn hi(self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn lo(self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub const fn pi() -> Self {
        PI
    }

    pub const fn epsilon() -> f64 {
        EPS
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.hi.is_finite()
    }

    #[inline]
    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    #[inline]
    fn mul_f64(self, b: f64) -> Self {
        let (p1, mut p2) = two_prod(self.hi, b);
        p2 += self.lo * b;
        let (hi, lo) = quick_two_sum(p1, p2);
        Self { hi, lo }
    }

    #[inline]
    fn add_f64(self, b: f64) -> Self {
        let (s1, mut s2) = two_sum(self.hi, b);
        s2 += self.lo;
        let (hi, lo) = quick_two_sum(s1, s2);
        Self { hi, lo }
    }

    /// Multiplication by an exact power of two.
    #[inline]
    fn scale(self, f: f64) -> Self {
        Self {
            hi: self.hi * f,
            lo: self.lo * f,
        }
    }

    #[inline]
    pub fn sqr(self) -> Self {
        let (p1, mut p2) = two_prod(self.hi, self.hi);
        p2 += 2.0 * self.hi * self.lo;
        p2 += self.lo * self.lo;
        let (hi, lo) = quick_two_sum(p1, p2);
        Self { hi, lo }
    }

    pub fn sqrt(self) -> Self {
        if self.hi == 0.0 {
            return Self::ZERO;
        }
        if self.hi < 0.0 {
            return Self::from_f64(f64::NAN);
        }
        let x = 1.0 / self.hi.sqrt();
        let ax = self.hi * x;
        let corr = (self - Self::from_f64(ax).sqr()).hi * (x * 0.5);
        let (hi, lo) = two_sum(ax, corr);
        Self { hi, lo }
    }

    pub fn exp(self) -> Self {
        if self.hi <= -709.0 {
            return Self::ZERO;
        }
        if self.hi >= 709.0 {
            return Self::from_f64(f64::INFINITY);
        }
        if self.hi == 0.0 && self.lo == 0.0 {
            return Self::ONE;
        }
        const INV_K: f64 = 1.0 / 512.0;
        let m = (self.hi / LN2.hi + 0.5).floor();
        let r = (self - LN2.mul_f64(m)).scale(INV_K);

        // expm1(r) by Taylor series, |r| <= ln2/1024
        let mut p = r.sqr();
        let mut s = r + p.scale(0.5);
        p *= r;
        let mut fact = 6.0;
        let mut n = 3.0;
        let mut t = p / Self::from_f64(fact);
        while t.hi.abs() > INV_K * EPS && n < 20.0 {
            s += t;
            p *= r;
            n += 1.0;
            fact *= n;
            t = p / Self::from_f64(fact);
        }
        s += t;

        // undo the 1/512 reduction: expm1(2x) = 2 expm1(x) + expm1(x)^2
        for _ in 0..9 {
            s = s.scale(2.0) + s.sqr();
        }
        s = s.add_f64(1.0);
        ldexp(s, m as i32)
    }

    pub fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Self::ONE;
        }
        let mut base = self;
        let mut e = n.unsigned_abs();
        let mut acc = Self::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base = base.sqr();
            e >>= 1;
        }
        if n < 0 {
            Self::ONE / acc
        } else {
            acc
        }
    }

    pub fn trunc(self) -> Self {
        let hi = self.hi.trunc();
        if hi == self.hi {
            let (hi, lo) = quick_two_sum(hi, self.lo.trunc());
            Self { hi, lo }
        } else {
            Self::from_f64(hi)
        }
    }
}

fn ldexp(v: DoubleDouble, m: i32) -> DoubleDouble {
    // split the scaling so neither factor overflows
    let half = m / 2;
    let f1 = 2f64.powi(half);
    let f2 = 2f64.powi(m - half);
    v.scale(f1).scale(f2)
}

impl From<f64> for DoubleDouble {
    fn from(v: f64) -> Self {
        Self::from_f64(v)
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    #[inline]
    fn add(self, b: Self) -> Self {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let s2 = s2 + t1;
        let (s1, s2) = quick_two_sum(s1, s2);
        let s2 = s2 + t2;
        let (hi, lo) = quick_two_sum(s1, s2);
        Self { hi, lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    #[inline]
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    #[inline]
    fn mul(self, b: Self) -> Self {
        let (p1, mut p2) = two_prod(self.hi, b.hi);
        p2 += self.hi * b.lo + self.lo * b.hi;
        let (hi, lo) = quick_two_sum(p1, p2);
        Self { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, b: Self) -> Self {
        let q1 = self.hi / b.hi;
        let mut r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        r -= b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (q1, q2) = quick_two_sum(q1, q2);
        Self { hi: q1, lo: q2 }.add_f64(q3)
    }
}

impl Rem for DoubleDouble {
    type Output = Self;
    fn rem(self, b: Self) -> Self {
        self - (self / b).trunc() * b
    }
}

macro_rules! assign_op {
    ($tr:ident, $m:ident, $op:tt) => {
        impl $tr for DoubleDouble {
            #[inline]
            fn $m(&mut self, rhs: Self) {
                *self = *self $op rhs;
            }
        }
    };
}
assign_op!(AddAssign, add_assign, +);
assign_op!(SubAssign, sub_assign, -);
assign_op!(MulAssign, mul_assign, *);
assign_op!(DivAssign, div_assign, /);
assign_op!(RemAssign, rem_assign, %);

impl PartialEq for DoubleDouble {
    fn eq(&self, other: &Self) -> bool {
        self.hi == other.hi && self.lo == other.lo
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi)? {
            Ordering::Equal => self.lo.partial_cmp(&other.lo),
            o => Some(o),
        }
    }
}

impl Zero for DoubleDouble {
    fn zero() -> Self {
        Self::ZERO
    }
    fn is_zero(&self) -> bool {
        self.hi == 0.0
    }
}

impl One for DoubleDouble {
    fn one() -> Self {
        Self::ONE
    }
}

impl Num for DoubleDouble {
    type FromStrRadixErr = std::num::ParseFloatError;

    fn from_str_radix(s: &str, _radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        s.parse::<f64>().map(Self::from_f64)
    }
}

impl Sum for DoubleDouble {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, |a, b| a + b)
    }
}

impl fmt::Debug for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DoubleDouble({:e} + {:e})", self.hi, self.lo)
    }
}

impl fmt::Display for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.to_f64(), f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dd(v: f64) -> DoubleDouble {
        DoubleDouble::from_f64(v)
    }

    #[test]
    fn one_third_times_three() {
        let third = dd(1.0) / dd(3.0);
        let back = third * dd(3.0) - dd(1.0);
        assert!(back.abs().to_f64() < 1e-31);
    }

    #[test]
    fn sqrt_two_squared() {
        let r = dd(2.0).sqrt();
        assert!((r.sqr() - dd(2.0)).abs().to_f64() < 1e-31);
    }

    #[test]
    fn exp_log_identities() {
        // exp(a)exp(b) = exp(a+b) to double-double accuracy
        for &(a, b) in &[(0.3, -1.7), (5.25, 3.5), (-20.0, 19.0), (1e-5, 2e-5)] {
            let lhs = dd(a).exp() * dd(b).exp();
            let rhs = (dd(a) + dd(b)).exp();
            let rel = ((lhs - rhs) / rhs).abs().to_f64();
            assert!(rel < 1e-30, "a={a} b={b} rel={rel}");
        }
        // exp(ln 2) = 2
        let two = LN2.exp();
        assert!((two - dd(2.0)).abs().to_f64() < 1e-30);
        // agrees with f64 exp to double precision
        for &x in &[-30.0, -1.0, 0.5, 7.0, 100.0] {
            let v = dd(x).exp().to_f64();
            assert!(((v - x.exp()) / x.exp()).abs() < 4e-16);
        }
    }

    #[test]
    fn exp_e_constant() {
        // e = 2.718281828459045235360287471352662...
        let e = dd(1.0).exp();
        assert_eq!(e.hi(), std::f64::consts::E);
        assert!((e.lo() - 1.445_646_891_729_250_2e-16).abs() < 1e-31);
    }

    #[test]
    fn exact_integer_conversion() {
        let big = 123_456_789_012_345_678_i64;
        let v = DoubleDouble::from_i64(big);
        assert_eq!(v.hi() as i128 + v.lo() as i128, big as i128);
    }

    #[test]
    fn powi_and_ordering() {
        let x = dd(1.1);
        let p = x.powi(10);
        let q = (0..10).fold(DoubleDouble::ONE, |acc, _| acc * x);
        assert!(((p - q) / q).abs().to_f64() < 1e-30);
        assert!(x.powi(-2) < DoubleDouble::ONE);
        assert!(dd(1.0) + dd(1e-20) > dd(1.0));
    }
}
