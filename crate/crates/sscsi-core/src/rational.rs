//! Exact rational scalars for geometry arithmetic.
//!
//! Every pitch, mask position and wavelength that enters a floor/ceiling
//! expression is kept as an exact ratio of 128-bit integers so that cell
//! boundary decisions (which code column covers which detector pixel) are
//! bit-reproducible and independent of floating-point rounding.  Values are
//! converted to `f64` only after all index arithmetic is done.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Exact rational number over `i128`.
///
/// Magnitudes in this crate are small (pitches in micrometers, wavelengths in
/// nanometers, pixel counts in the thousands), so reduced `i128` ratios have
/// ample headroom; arithmetic panics on overflow rather than silently losing
/// exactness.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(Ratio<i128>);

impl Rational {
    pub const ZERO: Rational = Rational(Ratio::new_raw(0, 1));
    pub const ONE: Rational = Rational(Ratio::new_raw(1, 1));

    /// Reduced ratio `num/den`. Panics if `den == 0`.
    pub fn new(num: i128, den: i128) -> Self {
        Rational(Ratio::new(num, den))
    }

    pub fn from_int(v: i128) -> Self {
        Rational(Ratio::from_integer(v))
    }

    pub fn numer(&self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i128 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    /// Largest integer `<= self`.
    pub fn floor_int(&self) -> i128 {
        self.0.floor().to_integer()
    }

    /// Smallest integer `>= self`.
    pub fn ceil_int(&self) -> i128 {
        self.0.ceil().to_integer()
    }

    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().expect("ratio representable as f64")
    }

    /// Exact reciprocal. Panics on zero.
    pub fn recip(&self) -> Self {
        Rational(self.0.recip())
    }

    /// Parses a decimal literal (`"0.125"`, `"-3"`, `"1e-3"`) or an explicit
    /// fraction (`"24/256"`) into an exact rational.
    ///
    /// Decimal digits are mapped to `digits / 10^k` with no rounding, which is
    /// what makes text-specified pitches exact; binary floats never enter.
    pub fn parse(text: &str) -> Result<Self> {
        let s = text.trim();
        if s.is_empty() {
            return Err(Error::parse("empty numeric literal"));
        }
        if let Some((num, den)) = s.split_once('/') {
            let n = Self::parse_decimal(num.trim())?;
            let d = Self::parse_decimal(den.trim())?;
            if d.is_zero() {
                return Err(Error::parse(format!("zero denominator in `{s}`")));
            }
            return Ok(n / d);
        }
        Self::parse_decimal(s)
    }

    fn parse_decimal(s: &str) -> Result<Self> {
        let err = || Error::parse(format!("invalid numeric literal `{s}`"));
        let (mantissa, exp) = match s.split_once(['e', 'E']) {
            Some((m, e)) => (m, e.parse::<i32>().map_err(|_| err())?),
            None => (s, 0),
        };
        let (sign, digits) = match mantissa.strip_prefix('-') {
            Some(rest) => (-1i128, rest),
            None => (1i128, mantissa.strip_prefix('+').unwrap_or(mantissa)),
        };
        let (int_part, frac_part) = match digits.split_once('.') {
            Some((i, f)) => (i, f),
            None => (digits, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err());
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(err());
        }
        let mut value: i128 = 0;
        for b in int_part.bytes().chain(frac_part.bytes()) {
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add((b - b'0') as i128))
                .ok_or_else(|| Error::parse(format!("numeric literal `{s}` out of range")))?;
        }
        let scale = frac_part.len() as i32 - exp;
        if scale.unsigned_abs() > 30 {
            return Err(Error::parse(format!("exponent out of range in `{s}`")));
        }
        let pow = 10i128
            .checked_pow(scale.unsigned_abs())
            .ok_or_else(|| Error::parse(format!("exponent out of range in `{s}`")))?;
        let ratio = if scale >= 0 {
            Ratio::new(sign * value, pow)
        } else {
            Ratio::from_integer(sign * value) * Ratio::from_integer(pow)
        };
        Ok(Rational(ratio))
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for Rational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Rational::parse(s)
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Rational::parse(&text).map_err(serde::de::Error::custom)
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(self.0.$method(rhs.0))
            }
        }
        impl $trait<&Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational(self.0.$method(rhs.0))
            }
        }
        impl $trait<Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(self.0.$method(rhs.0))
            }
        }
        impl $trait<&Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational(self.0.$method(rhs.0))
            }
        }
    };
}

impl_binop!(Add, add);
impl_binop!(Sub, sub);
impl_binop!(Mul, mul);
impl_binop!(Div, div);

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl From<i128> for Rational {
    fn from(v: i128) -> Self {
        Rational::from_int(v)
    }
}

impl From<u32> for Rational {
    fn from(v: u32) -> Self {
        Rational::from_int(v as i128)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(Rational::parse("0.125").unwrap(), Rational::new(1, 8));
        assert_eq!(Rational::parse("24/256").unwrap(), Rational::new(3, 32));
        assert_eq!(Rational::parse("-3").unwrap(), Rational::from_int(-3));
        assert_eq!(Rational::parse("1e-3").unwrap(), Rational::new(1, 1000));
        assert_eq!(Rational::parse("2.5e2").unwrap(), Rational::from_int(250));
        // 0.1 has no exact binary representation; the parser must not go
        // through f64.
        assert_eq!(Rational::parse("0.1").unwrap(), Rational::new(1, 10));
    }

    #[test]
    fn rejects_malformed_literals() {
        for bad in ["", "abc", "1.2.3", "1/0", "--2", "1e99"] {
            assert!(Rational::parse(bad).is_err(), "expected error for {bad:?}");
        }
    }

    #[test]
    fn floor_and_ceil_follow_integer_boundaries() {
        let x = Rational::new(7, 2);
        assert_eq!(x.floor_int(), 3);
        assert_eq!(x.ceil_int(), 4);
        let y = Rational::from_int(4);
        assert_eq!(y.floor_int(), 4);
        assert_eq!(y.ceil_int(), 4);
        let z = Rational::new(-7, 2);
        assert_eq!(z.floor_int(), -4);
        assert_eq!(z.ceil_int(), -3);
    }

    #[test]
    fn arithmetic_stays_exact() {
        let s = Rational::parse("0.09375").unwrap(); // 24/256
        let n = Rational::from_int(256);
        assert_eq!((s * n), Rational::from_int(24));
    }

    #[test]
    fn display_round_trips() {
        for text in ["3/8", "-5", "7/3"] {
            let v = Rational::parse(text).unwrap();
            assert_eq!(Rational::parse(&v.to_string()).unwrap(), v);
        }
    }
}
