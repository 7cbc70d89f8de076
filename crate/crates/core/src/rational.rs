//! Exact rational numbers.
//!
//! Values are kept in lowest terms with a positive denominator. Arithmetic
//! runs on `i128` while it fits and transparently promotes to arbitrary
//! precision on overflow, so results are always exact.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

type Small = Ratio<i128>;

#[derive(Clone, Debug)]
enum Repr {
    Small(Small),
    Big(BigRational),
}

/// An exact rational number in lowest terms.
///
/// The `Big` representation is only used when the value does not fit in
/// `i128`, so structural equality is value equality.
#[derive(Clone)]
pub struct Rational(Repr);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed rational `{token}`")]
pub struct ParseRationalError {
    pub token: String,
}

impl Rational {
    pub fn zero() -> Self {
        Rational(Repr::Small(Small::zero()))
    }

    pub fn one() -> Self {
        Rational(Repr::Small(Small::one()))
    }

    pub fn from_integer(n: i64) -> Self {
        Rational(Repr::Small(Small::from_integer(n as i128)))
    }

    /// `numer / denom`, reduced. Panics if `denom == 0`.
    pub fn new(numer: i64, denom: i64) -> Self {
        assert!(denom != 0, "zero denominator");
        Rational(Repr::Small(Small::new(numer as i128, denom as i128)))
    }

    fn from_big(r: BigRational) -> Self {
        match (r.numer().to_i128(), r.denom().to_i128()) {
            (Some(n), Some(d)) => Rational(Repr::Small(Small::new_raw(n, d))),
            _ => Rational(Repr::Big(r)),
        }
    }

    fn to_big(&self) -> BigRational {
        match &self.0 {
            Repr::Small(s) => BigRational::new_raw(BigInt::from(*s.numer()), BigInt::from(*s.denom())),
            Repr::Big(b) => b.clone(),
        }
    }

    /// The exact value of a finite `f64` (every finite float is a dyadic rational).
    pub fn from_f64_exact(x: f64) -> Option<Self> {
        BigRational::from_float(x).map(Self::from_big)
    }

    pub fn to_f64(&self) -> f64 {
        match &self.0 {
            Repr::Small(s) => s.to_f64().unwrap_or(f64::NAN),
            Repr::Big(b) => b.to_f64().unwrap_or(f64::NAN),
        }
    }

    pub fn numer_string(&self) -> String {
        match &self.0 {
            Repr::Small(s) => s.numer().to_string(),
            Repr::Big(b) => b.numer().to_string(),
        }
    }

    pub fn denom_string(&self) -> String {
        match &self.0 {
            Repr::Small(s) => s.denom().to_string(),
            Repr::Big(b) => b.denom().to_string(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.0 {
            Repr::Small(s) => s.is_zero(),
            Repr::Big(b) => b.is_zero(),
        }
    }

    pub fn is_one(&self) -> bool {
        match &self.0 {
            Repr::Small(s) => s.is_one(),
            Repr::Big(_) => false,
        }
    }

    pub fn is_negative(&self) -> bool {
        match &self.0 {
            Repr::Small(s) => s.is_negative(),
            Repr::Big(b) => b.is_negative(),
        }
    }

    pub fn is_integer(&self) -> bool {
        match &self.0 {
            Repr::Small(s) => s.is_integer(),
            Repr::Big(b) => b.is_integer(),
        }
    }

    pub fn abs(&self) -> Self {
        if self.is_negative() {
            -self
        } else {
            self.clone()
        }
    }

    /// Panics on zero.
    pub fn recip(&self) -> Self {
        Self::one() / self
    }

    /// True if `-1 <= self <= 1`.
    pub fn is_unit_bounded(&self) -> bool {
        let one = Self::one();
        *self <= one && *self >= -&one
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $checked:ident, $big:tt) => {
        impl<'a> $trait<&'a Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                if let (Repr::Small(a), Repr::Small(b)) = (&self.0, &rhs.0) {
                    if let Some(r) = a.$checked(b) {
                        return Rational(Repr::Small(r));
                    }
                }
                Rational::from_big(self.to_big() $big rhs.to_big())
            }
        }
        impl $trait<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                (&self).$method(&rhs)
            }
        }
        impl<'a> $trait<&'a Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                (&self).$method(rhs)
            }
        }
        impl<'a> $trait<Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                self.$method(&rhs)
            }
        }
    };
}

binop!(Add, add, checked_add, +);
binop!(Sub, sub, checked_sub, -);
binop!(Mul, mul, checked_mul, *);
binop!(Div, div, checked_div, /);

impl AddAssign<&Rational> for Rational {
    fn add_assign(&mut self, rhs: &Rational) {
        *self = &*self + rhs;
    }
}

impl AddAssign<Rational> for Rational {
    fn add_assign(&mut self, rhs: Rational) {
        *self = &*self + &rhs;
    }
}

impl SubAssign<&Rational> for Rational {
    fn sub_assign(&mut self, rhs: &Rational) {
        *self = &*self - rhs;
    }
}

impl MulAssign<&Rational> for Rational {
    fn mul_assign(&mut self, rhs: &Rational) {
        *self = &*self * rhs;
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        match &self.0 {
            Repr::Small(s) => match s.numer().checked_neg() {
                Some(n) => Rational(Repr::Small(Small::new_raw(n, *s.denom()))),
                None => Rational::from_big(-self.to_big()),
            },
            Repr::Big(b) => Rational::from_big(-b.clone()),
        }
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        -&self
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Self {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Self {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

impl PartialEq for Rational {
    fn eq(&self, other: &Self) -> bool {
        match (&self.0, &other.0) {
            (Repr::Small(a), Repr::Small(b)) => a.numer() == b.numer() && a.denom() == b.denom(),
            (Repr::Big(a), Repr::Big(b)) => a.numer() == b.numer() && a.denom() == b.denom(),
            _ => false,
        }
    }
}

impl Eq for Rational {}

impl Hash for Rational {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match &self.0 {
            Repr::Small(s) => {
                0u8.hash(state);
                s.numer().hash(state);
                s.denom().hash(state);
            }
            Repr::Big(b) => {
                1u8.hash(state);
                b.numer().hash(state);
                b.denom().hash(state);
            }
        }
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> Ordering {
        match (&self.0, &other.0) {
            (Repr::Small(a), Repr::Small(b)) => a.cmp(b),
            _ => self.to_big().cmp(&other.to_big()),
        }
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::from_integer(n)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small(s) => write!(f, "{}", s),
            Repr::Big(b) => write!(f, "{}", b),
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn parse_int(s: &str) -> Option<BigInt> {
    let digits = s.strip_prefix('+').unwrap_or(s);
    let body = digits.strip_prefix('-').unwrap_or(digits);
    if body.is_empty() || !body.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

impl FromStr for Rational {
    type Err = ParseRationalError;

    /// Accepts `n`, `n/d`, and decimal strings such as `-0.125`; decimals are
    /// converted exactly.
    fn from_str(raw: &str) -> Result<Self, Self::Err> {
        let err = || ParseRationalError { token: raw.to_string() };
        let s = raw.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n = parse_int(n.trim()).ok_or_else(err)?;
            let d = parse_int(d.trim()).ok_or_else(err)?;
            if d.is_zero() {
                return Err(err());
            }
            return Ok(Rational::from_big(BigRational::new(n, d)));
        }
        if let Some((int_part, frac)) = s.split_once('.') {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(err());
            }
            let negative = int_part.starts_with('-');
            let int_digits = int_part.trim_start_matches(['+', '-']);
            let int_val = if int_digits.is_empty() {
                BigInt::zero()
            } else {
                parse_int(int_digits).ok_or_else(err)?
            };
            if int_part.len() - int_digits.len() > 1 {
                return Err(err());
            }
            let scale = num_traits::pow(BigInt::from(10), frac.len());
            let frac_val: BigInt = frac.parse().map_err(|_| err())?;
            let mut numer = int_val * &scale + frac_val;
            if negative {
                numer = -numer;
            }
            return Ok(Rational::from_big(BigRational::new(numer, scale)));
        }
        let n = parse_int(s).ok_or_else(err)?;
        Ok(Rational::from_big(BigRational::from_integer(n)))
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Shorthand for `Rational::new(n, d)`.
pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}
