//! Exact Gaussian rationals.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// A complex number `re + i im` with exact rational parts.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ComplexScalar {
    pub re: BigRational,
    pub im: BigRational,
}

pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

impl ComplexScalar {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        ComplexScalar { re, im }
    }

    pub fn from_ints(re: i64, im: i64) -> Self {
        ComplexScalar::new(rat(re, 1), rat(im, 1))
    }

    pub fn real(re: BigRational) -> Self {
        ComplexScalar::new(re, BigRational::zero())
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        ComplexScalar::real(rat(num, den))
    }

    pub fn i() -> Self {
        ComplexScalar::from_ints(0, 1)
    }

    pub fn zero() -> Self {
        ComplexScalar::from_ints(0, 0)
    }

    pub fn one() -> Self {
        ComplexScalar::from_ints(1, 0)
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        ComplexScalar::new(self.re.clone(), -self.im.clone())
    }

    pub fn norm_sqr(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let n = self.norm_sqr();
        Some(ComplexScalar::new(&self.re / &n, -&self.im / &n))
    }

    pub fn pow(&self, exp: u32) -> Self {
        let mut acc = ComplexScalar::one();
        let mut base = self.clone();
        let mut e = exp;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        acc
    }

    /// Integer power allowing negative exponents.
    pub fn powi(&self, exp: i64) -> Option<Self> {
        if exp >= 0 {
            Some(self.pow(exp as u32))
        } else {
            self.inv().map(|v| v.pow((-exp) as u32))
        }
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(rat_to_f64(&self.re), rat_to_f64(&self.im))
    }

    /// Closest exact value to a float pair (floats are dyadic rationals).
    pub fn from_c64(value: Complex64) -> Option<Self> {
        Some(ComplexScalar::new(
            BigRational::from_float(value.re)?,
            BigRational::from_float(value.im)?,
        ))
    }
}

pub fn rat_to_f64(value: &BigRational) -> f64 {
    value.to_f64().unwrap_or_else(|| {
        // huge numerators and denominators: scale both down first
        let shift = value.numer().bits().max(value.denom().bits()).saturating_sub(1000);
        let num = (value.numer() >> shift).to_f64().unwrap_or(f64::NAN);
        let den = (value.denom() >> shift).to_f64().unwrap_or(f64::NAN);
        num / den
    })
}

fn fmt_rat(value: &BigRational) -> String {
    if value.is_integer() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

impl fmt::Display for ComplexScalar {
    /// Canonical `(a+bi)` form.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.im.is_negative() { '-' } else { '+' };
        write!(f, "({}{}{}i)", fmt_rat(&self.re), sign, fmt_rat(&self.im.abs()))
    }
}

impl<'a> Add<&'a ComplexScalar> for &'a ComplexScalar {
    type Output = ComplexScalar;
    fn add(self, rhs: &ComplexScalar) -> ComplexScalar {
        ComplexScalar::new(&self.re + &rhs.re, &self.im + &rhs.im)
    }
}

impl<'a> Sub<&'a ComplexScalar> for &'a ComplexScalar {
    type Output = ComplexScalar;
    fn sub(self, rhs: &ComplexScalar) -> ComplexScalar {
        ComplexScalar::new(&self.re - &rhs.re, &self.im - &rhs.im)
    }
}

impl<'a> Mul<&'a ComplexScalar> for &'a ComplexScalar {
    type Output = ComplexScalar;
    fn mul(self, rhs: &ComplexScalar) -> ComplexScalar {
        ComplexScalar::new(
            &self.re * &rhs.re - &self.im * &rhs.im,
            &self.re * &rhs.im + &self.im * &rhs.re,
        )
    }
}

impl Neg for &ComplexScalar {
    type Output = ComplexScalar;
    fn neg(self) -> ComplexScalar {
        ComplexScalar::new(-self.re.clone(), -self.im.clone())
    }
}

impl Add for ComplexScalar {
    type Output = ComplexScalar;
    fn add(self, rhs: ComplexScalar) -> ComplexScalar {
        &self + &rhs
    }
}

impl Sub for ComplexScalar {
    type Output = ComplexScalar;
    fn sub(self, rhs: ComplexScalar) -> ComplexScalar {
        &self - &rhs
    }
}

impl Mul for ComplexScalar {
    type Output = ComplexScalar;
    fn mul(self, rhs: ComplexScalar) -> ComplexScalar {
        &self * &rhs
    }
}

impl Neg for ComplexScalar {
    type Output = ComplexScalar;
    fn neg(self) -> ComplexScalar {
        -&self
    }
}

impl From<i64> for ComplexScalar {
    fn from(v: i64) -> Self {
        ComplexScalar::from_ints(v, 0)
    }
}

impl One for ComplexScalar {
    fn one() -> Self {
        ComplexScalar::one()
    }
}

impl Zero for ComplexScalar {
    fn zero() -> Self {
        ComplexScalar::zero()
    }
    fn is_zero(&self) -> bool {
        ComplexScalar::is_zero(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_and_power() {
        let a = ComplexScalar::from_ints(3, 4);
        let inv = a.inv().unwrap();
        assert_eq!(&a * &inv, ComplexScalar::one());
        assert_eq!(a.pow(2), ComplexScalar::from_ints(-7, 24));
        assert_eq!(ComplexScalar::i().pow(4), ComplexScalar::one());
        assert!(ComplexScalar::zero().inv().is_none());
    }

    #[test]
    fn display_is_canonical() {
        assert_eq!(ComplexScalar::from_ints(1, 0).to_string(), "(1+0i)");
        assert_eq!(ComplexScalar::new(rat(1, 10), rat(-3, 4)).to_string(), "(1/10-3/4i)");
    }

    #[test]
    fn float_view_matches() {
        let a = ComplexScalar::new(rat(1, 3), rat(-2, 7));
        let z = a.to_c64();
        assert!((z.re - 1.0 / 3.0).abs() < 1e-16);
        assert!((z.im + 2.0 / 7.0).abs() < 1e-16);
    }
}
