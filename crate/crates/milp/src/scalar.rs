//! Scalar abstraction shared by the LP engine, the branch-and-bound driver and
//! the enumeration oracle.
//!
//! Exact instantiations (`BigRational`) report zero tolerances, so every
//! comparison is a plain sign test. Floating instantiations use a small
//! absolute tolerance instead.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

/// Numeric type usable as a coefficient / value in a [`crate::MilpModel`].
pub trait Scalar:
    Clone
    + fmt::Debug
    + fmt::Display
    + PartialOrd
    + Num
    + Signed
    + FromPrimitive
    + ToPrimitive
    + Send
    + Sync
    + 'static
{
    /// `true` when arithmetic is exact (no rounding ever happens).
    const EXACT: bool;

    /// Absolute tolerance for sign tests. Zero for exact types.
    fn tolerance() -> Self;

    fn floor(&self) -> Self;
    fn ceil(&self) -> Self;

    /// `num / den`, exact where the type allows it.
    fn from_ratio(num: i64, den: i64) -> Self;

    /// Parses an LP-format number: integers, decimals with optional exponent,
    /// and `p/q` fractions.
    fn parse_number(s: &str) -> Option<Self>;

    /// Renders a value so that [`Scalar::parse_number`] reproduces it exactly.
    fn to_number_string(&self) -> String;

    fn is_pos(&self) -> bool {
        *self > Self::tolerance()
    }

    fn is_neg(&self) -> bool {
        *self < -Self::tolerance()
    }

    fn near_zero(&self) -> bool {
        !self.is_pos() && !self.is_neg()
    }

    /// Distance to the nearest integer is within `tol`.
    fn is_integral(&self, tol: &Self) -> bool {
        let down = self.clone() - self.floor();
        let up = self.ceil() - self.clone();
        down <= *tol || up <= *tol
    }

    /// Nearest integer (ties away from zero), used to snap integral values.
    fn round_integral(&self) -> Self {
        let half = Self::from_ratio(1, 2);
        if self.is_negative() {
            -((-self.clone()) + half).floor()
        } else {
            (self.clone() + half).floor()
        }
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn tolerance() -> Self {
        BigRational::zero()
    }

    fn floor(&self) -> Self {
        BigRational::floor(self)
    }

    fn ceil(&self) -> Self {
        BigRational::ceil(self)
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn parse_number(s: &str) -> Option<Self> {
        parse_exact(s)
    }

    fn to_number_string(&self) -> String {
        format_exact(self)
    }

    fn is_integral(&self, _tol: &Self) -> bool {
        self.is_integer()
    }

    fn round_integral(&self) -> Self {
        self.round()
    }
}

macro_rules! float_scalar {
    ($t:ty, $tol:expr) => {
        impl Scalar for $t {
            const EXACT: bool = false;

            fn tolerance() -> Self {
                $tol
            }

            fn floor(&self) -> Self {
                <$t>::floor(*self)
            }

            fn ceil(&self) -> Self {
                <$t>::ceil(*self)
            }

            fn from_ratio(num: i64, den: i64) -> Self {
                num as $t / den as $t
            }

            fn parse_number(s: &str) -> Option<Self> {
                if let Some((p, q)) = s.split_once('/') {
                    let p: $t = p.trim().parse().ok()?;
                    let q: $t = q.trim().parse().ok()?;
                    if q == 0.0 {
                        return None;
                    }
                    return Some(p / q);
                }
                s.parse().ok()
            }

            fn to_number_string(&self) -> String {
                format!("{}", self)
            }

            fn round_integral(&self) -> Self {
                <$t>::round(*self)
            }
        }
    };
}

float_scalar!(f64, 1e-9);
float_scalar!(f32, 1e-5);

/// Parses an exact rational from an integer, a decimal literal (optionally
/// with an exponent, e.g. `1.5e3`) or a `p/q` fraction.
pub fn parse_exact(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    if let Some((p, q)) = s.split_once('/') {
        let p = parse_exact(p)?;
        let q = parse_exact(q)?;
        if q.is_zero() {
            return None;
        }
        return Some(p / q);
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.as_bytes().first()? {
        b'-' => (true, &mantissa[1..]),
        b'+' => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let all_digits = format!("{int_part}{frac_part}");
    let numer = BigInt::from_str(if all_digits.is_empty() { "0" } else { &all_digits }).ok()?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let value = if scale >= 0 {
        BigRational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Some(if negative { -value } else { value })
}

/// Renders an exact rational as a decimal string when its expansion
/// terminates, else as `p/q`.
pub fn format_exact(value: &BigRational) -> String {
    if value.is_integer() {
        return value.numer().to_string();
    }
    let mut den = value.denom().clone();
    let two = BigInt::from(2u32);
    let five = BigInt::from(5u32);
    let mut twos = 0usize;
    let mut fives = 0usize;
    while (&den % &two).is_zero() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return format!("{}/{}", value.numer(), value.denom());
    }
    let digits = twos.max(fives);
    let scaled = value * BigRational::from_integer(num_traits::pow(BigInt::from(10u32), digits));
    debug_assert!(scaled.is_integer());
    let n = scaled.to_integer();
    let negative = n.is_negative();
    let mut text = n.abs().to_string();
    if text.len() <= digits {
        text = format!("{}{}", "0".repeat(digits + 1 - text.len()), text);
    }
    let split = text.len() - digits;
    format!("{}{}.{}", if negative { "-" } else { "" }, &text[..split], &text[split..])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::from_ratio(n, d)
    }

    #[test]
    fn parse_decimal_and_fraction() {
        assert_eq!(parse_exact("1.25"), Some(q(5, 4)));
        assert_eq!(parse_exact("-0.1"), Some(q(-1, 10)));
        assert_eq!(parse_exact("1e3"), Some(q(1000, 1)));
        assert_eq!(parse_exact("2.5E-1"), Some(q(1, 4)));
        assert_eq!(parse_exact("46000/3"), Some(q(46000, 3)));
        assert_eq!(parse_exact(".5"), Some(q(1, 2)));
        assert_eq!(parse_exact("abc"), None);
        assert_eq!(parse_exact("1/0"), None);
        assert_eq!(parse_exact(""), None);
    }

    #[test]
    fn format_terminating_and_repeating() {
        assert_eq!(format_exact(&q(5, 4)), "1.25");
        assert_eq!(format_exact(&q(-1, 20)), "-0.05");
        assert_eq!(format_exact(&q(1750, 1)), "1750");
        assert_eq!(format_exact(&q(46000, 3)), "46000/3");
        assert_eq!(format_exact(&q(1, 1024)), "0.0009765625");
    }

    #[test]
    fn rounding_helpers() {
        assert_eq!(q(5, 2).round_integral(), q(3, 1));
        assert!(q(3, 1).is_integral(&BigRational::zero()));
        assert!(!q(7, 2).is_integral(&BigRational::zero()));
        assert_eq!(Scalar::ceil(&q(161, 160)), q(2, 1));
        assert!(2.0000000001f64.is_integral(&1e-6));
        assert_eq!((-2.5f64).round_integral(), -3.0);
    }

    proptest::proptest! {
        #[test]
        fn exact_string_round_trip(n in -100_000i64..100_000, d in 1i64..5_000) {
            let v = q(n, d);
            proptest::prop_assert_eq!(parse_exact(&format_exact(&v)), Some(v));
        }
    }
}
