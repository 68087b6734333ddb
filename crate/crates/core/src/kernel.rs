//! Measurement kernels and their exact x-derivatives.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpikeError};
use crate::scalar::Scalar;

/// Highest order for which the Hermite-type coefficients fit in `i64`.
pub const GAUSSIAN_MAX_ORDER: usize = 24;
pub const LAPLACE_MAX_ORDER: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Gaussian,
    Laplace,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
        lo_closed: false,
        hi_closed: false,
    };

    pub fn contains(&self, v: f64) -> bool {
        let above = if self.lo_closed { v >= self.lo } else { v > self.lo };
        let below = if self.hi_closed { v <= self.hi } else { v < self.hi };
        above && below
    }

    pub fn interior_contains(&self, v: f64) -> bool {
        v > self.lo && v < self.hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { '[' } else { '(' },
            self.lo,
            self.hi,
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

/// Impulse response `psi(x, s)`.
///
/// Gaussian: `exp(-((x - s) / sigma)^2)` on the whole line.
/// Laplace: `exp(-x s)` with `x >= c >= 0` and `s > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum Kernel {
    Gaussian {
        #[serde(default = "default_sigma")]
        sigma: f64,
    },
    Laplace {
        #[serde(default)]
        c: f64,
    },
}

fn default_sigma() -> f64 {
    1.0
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::Gaussian { sigma: 1.0 }
    }
}

impl Kernel {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        let k = Kernel::Gaussian { sigma };
        k.validate()?;
        Ok(k)
    }

    pub fn laplace(c: f64) -> Result<Self> {
        let k = Kernel::Laplace { c };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Gaussian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                Err(SpikeError::InvalidConfig(format!("Gaussian width must be positive, got {sigma}")))
            }
            Kernel::Laplace { c } if !(c >= 0.0 && c.is_finite()) => {
                Err(SpikeError::InvalidConfig(format!("Laplace domain bound must be >= 0, got {c}")))
            }
            _ => Ok(()),
        }
    }

    pub fn family(&self) -> KernelFamily {
        match self {
            Kernel::Gaussian { .. } => KernelFamily::Gaussian,
            Kernel::Laplace { .. } => KernelFamily::Laplace,
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            Kernel::Gaussian { sigma } => vec![sigma],
            Kernel::Laplace { .. } => Vec::new(),
        }
    }

    pub fn x_domain(&self) -> Interval {
        match *self {
            Kernel::Gaussian { .. } => Interval::REAL_LINE,
            Kernel::Laplace { c } => Interval {
                lo: c,
                hi: f64::INFINITY,
                lo_closed: true,
                hi_closed: false,
            },
        }
    }

    pub fn s_domain(&self) -> Interval {
        match *self {
            Kernel::Gaussian { .. } => Interval::REAL_LINE,
            Kernel::Laplace { .. } => Interval {
                lo: 0.0,
                hi: f64::INFINITY,
                lo_closed: false,
                hi_closed: false,
            },
        }
    }

    pub fn max_deriv_order(&self) -> usize {
        match self {
            Kernel::Gaussian { .. } => GAUSSIAN_MAX_ORDER,
            Kernel::Laplace { .. } => LAPLACE_MAX_ORDER,
        }
    }

    pub(crate) fn check_order(&self, k: usize) -> Result<()> {
        if k > self.max_deriv_order() {
            Err(SpikeError::DerivOrderUnsupported {
                requested: k,
                max: self.max_deriv_order(),
            })
        } else {
            Ok(())
        }
    }

    pub(crate) fn check_x(&self, x: f64) -> Result<()> {
        let d = self.x_domain();
        if d.contains(x) {
            Ok(())
        } else {
            Err(SpikeError::DomainViolation {
                what: "x",
                value: x,
                domain: d.to_string(),
            })
        }
    }

    /// `d^k/dx^k psi(x, s)` with order and domain checks.
    pub fn eval_kernel_deriv<T: Scalar>(&self, k: usize, x: T, s: T) -> Result<T> {
        self.check_order(k)?;
        self.check_x(x.to_f64())?;
        let sd = self.s_domain();
        if !sd.contains(s.to_f64()) {
            return Err(SpikeError::DomainViolation {
                what: "s",
                value: s.to_f64(),
                domain: sd.to_string(),
            });
        }
        let mut out = vec![T::zero(); k + 1];
        self.jet(x, s, T::zero(), &mut out);
        Ok(out[k])
    }

    /// Fills `out[i] = d^i/dx^i psi(x, s) * exp(shift)` for `i < out.len()`.
    ///
    /// No checks; `shift` lets callers rescale whole rows to dodge underflow.
    pub fn jet<T: Scalar>(&self, x: T, s: T, shift: T, out: &mut [T]) {
        match *self {
            Kernel::Gaussian { sigma } => {
                let sig = T::from_f64(sigma);
                let u = (x - s) / sig;
                let e = (shift - u * u).exp();
                let inv = T::one() / sig;
                let mut p = e;
                for (i, o) in out.iter_mut().enumerate() {
                    *o = hermite_aux(i, u) * p;
                    p *= inv;
                }
            }
            Kernel::Laplace { .. } => {
                let e = (shift - x * s).exp();
                let mut p = e;
                for o in out.iter_mut() {
                    *o = p;
                    p *= -s;
                }
            }
        }
    }

    /// Exponent that brings the largest of `psi(x, s_k)` to order one.
    pub(crate) fn rescale_shift<T: Scalar>(&self, x: T, samples: &[T]) -> T {
        match *self {
            Kernel::Gaussian { sigma } => {
                let sig = T::from_f64(sigma);
                samples
                    .iter()
                    .map(|&s| {
                        let u = (x - s) / sig;
                        u * u
                    })
                    .fold(None, |m: Option<T>, v| Some(m.map_or(v, |m| m.min_of(v))))
                    .unwrap_or_else(T::zero)
            }
            Kernel::Laplace { .. } => {
                let smin = samples.iter().fold(None, |m: Option<T>, &v| Some(m.map_or(v, |m| m.min_of(v))));
                smin.map_or_else(T::zero, |s| x * s)
            }
        }
    }
}

/// Integer coefficients of `tH_k`, lowest degree first.
pub fn hermite_coefficients(k: usize) -> &'static [i64] {
    static TABLE: OnceLock<Vec<Vec<i64>>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut rows: Vec<Vec<i128>> = vec![vec![1]];
        for k in 0..GAUSSIAN_MAX_ORDER {
            let prev = &rows[k];
            let mut next = vec![0i128; k + 2];
            // derivative term
            for (d, &c) in prev.iter().enumerate().skip(1) {
                next[d - 1] += c * d as i128;
            }
            // -2u * tH_k
            for (d, &c) in prev.iter().enumerate() {
                next[d + 1] -= 2 * c;
            }
            rows.push(next);
        }
        rows.into_iter()
            .map(|r| {
                r.into_iter()
                    .map(|c| i64::try_from(c).expect("Hermite coefficient overflow"))
                    .collect()
            })
            .collect()
    });
    assert!(k <= GAUSSIAN_MAX_ORDER, "Hermite order {k} above {GAUSSIAN_MAX_ORDER}");
    &table[k]
}

/// `tH_k(u) = exp(u^2) d^k/du^k exp(-u^2)`, evaluated by Horner on exact coefficients.
pub fn hermite_aux<T: Scalar>(k: usize, u: T) -> T {
    let coeffs = hermite_coefficients(k);
    let mut acc = T::zero();
    for &c in coeffs.iter().rev() {
        acc = acc * u + T::from_i64(c);
    }
    acc
}

/// `sum_i |c_i| |u|^i`, a majorant of `|tH_k(u)|`.
pub(crate) fn hermite_majorant(k: usize, u: f64) -> f64 {
    let au = u.abs();
    hermite_coefficients(k)
        .iter()
        .rev()
        .fold(0.0, |acc, &c| acc * au + (c as f64).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dd::DoubleDouble;

    #[test]
    fn spec_values() {
        let g = Kernel::gaussian(1.0).unwrap();
        assert_eq!(g.eval_kernel_deriv(0, 0.0, 0.0).unwrap(), 1.0);
        let v = g.eval_kernel_deriv(1, 1.0, 0.0).unwrap();
        assert!((v + 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((v + 0.7357589).abs() < 1e-7);
        let l = Kernel::laplace(0.0).unwrap();
        let v = l.eval_kernel_deriv(2, 1.0, 2.0).unwrap();
        assert!((v - 4.0 * (-2.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.5413411).abs() < 1e-7);
    }

    #[test]
    fn hermite_values() {
        assert_eq!(hermite_aux(0, 3.7), 1.0);
        assert_eq!(hermite_aux(2, 1.0), 2.0);
        assert_eq!(hermite_aux(3, 0.0), 0.0);
        assert_eq!(hermite_coefficients(3), &[0, 12, 0, -8]);
        for k in 0..=GAUSSIAN_MAX_ORDER {
            assert_eq!(hermite_coefficients(k).len(), k + 1);
            assert_eq!(*hermite_coefficients(k).last().unwrap(), (-2i64).pow(k as u32));
        }
    }

    #[test]
    fn order_and_domain_errors() {
        let g = Kernel::gaussian(1.0).unwrap();
        assert!(matches!(
            g.eval_kernel_deriv(25, 0.0, 0.0),
            Err(SpikeError::DerivOrderUnsupported { requested: 25, .. })
        ));
        let l = Kernel::laplace(0.5).unwrap();
        assert!(matches!(
            l.eval_kernel_deriv(0, 0.2, 1.0),
            Err(SpikeError::DomainViolation { what: "x", .. })
        ));
        assert!(matches!(
            l.eval_kernel_deriv(0, 1.0, 0.0),
            Err(SpikeError::DomainViolation { what: "s", .. })
        ));
        assert!(Kernel::gaussian(0.0).is_err());
        assert!(Kernel::laplace(-1.0).is_err());
    }

    #[test]
    fn extended_agrees_with_double() {
        let g = Kernel::gaussian(0.7).unwrap();
        for k in 0..8 {
            let a: f64 = g.eval_kernel_deriv(k, 0.3, -0.4).unwrap();
            let b: DoubleDouble = g
                .eval_kernel_deriv(k, DoubleDouble::from_f64(0.3), DoubleDouble::from_f64(-0.4))
                .unwrap();
            assert!((a - b.to_f64()).abs() <= 1e-13 * a.abs().max(1.0));
        }
    }

    #[test]
    fn shift_rescales_rows() {
        let l = Kernel::laplace(0.0).unwrap();
        let mut plain = [0.0; 3];
        let mut shifted = [0.0; 3];
        l.jet(2.0, 1.5, 0.0, &mut plain);
        l.jet(2.0, 1.5, 3.0, &mut shifted);
        for i in 0..3 {
            assert!((shifted[i] - plain[i] * 3.0f64.exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn serde_shape() {
        let k: Kernel = serde_json::from_str(r#"{"family":"gaussian","sigma":1.5}"#).unwrap();
        assert_eq!(k, Kernel::Gaussian { sigma: 1.5 });
        let k: Kernel = serde_json::from_str(r#"{"family":"laplace","c":0.0}"#).unwrap();
        assert_eq!(k, Kernel::Laplace { c: 0.0 });
        let k: Kernel = serde_json::from_str(r#"{"family":"gaussian"}"#).unwrap();
        assert_eq!(k, Kernel::Gaussian { sigma: 1.0 });
    }
}
