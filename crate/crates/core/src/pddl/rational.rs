//! Exact rational numbers used for every numeric fluent value.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `12`, `-3`, `0.25`, `+1.5`. Exponent notation is not accepted.
pub fn parse_decimal(text: &str) -> Option<Rational> {
    let (neg, body) = match text.as_bytes().first()? {
        b'-' => (true, &text[1..]),
        b'+' => (false, &text[1..]),
        _ => (false, text),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if body.ends_with('.') {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = digits.parse().ok()?;
    let denom = num_traits::pow(BigInt::from(10), frac_part.len());
    let value = Rational::new(numer, denom);
    Some(if neg { -value } else { value })
}

/// Shortest exact decimal rendering, or `None` when the value has no finite
/// decimal expansion.
pub fn to_decimal(value: &Rational) -> Option<String> {
    let denom = value.denom().clone();
    let mut rest = denom.clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let mut twos = 0usize;
    let mut fives = 0usize;
    while (&rest % &two).is_zero() {
        rest /= &two;
        twos += 1;
    }
    while (&rest % &five).is_zero() {
        rest /= &five;
        fives += 1;
    }
    if !rest.is_one() {
        return None;
    }
    let places = twos.max(fives);
    let scale = num_traits::pow(BigInt::from(10), places);
    let scaled = value.numer() * (&scale / &denom);
    let neg = scaled.is_negative();
    let mut digits = scaled.abs().to_string();
    if places == 0 {
        return Some(if neg { format!("-{digits}") } else { digits });
    }
    while digits.len() <= places {
        digits.insert(0, '0');
    }
    let split = digits.len() - places;
    let s = format!("{}.{}", &digits[..split], &digits[split..]);
    Some(if neg { format!("-{s}") } else { s })
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Human-facing rendering: exact decimal when finite, otherwise `n/d`.
pub fn display(value: &Rational) -> String {
    to_decimal(value).unwrap_or_else(|| format!("{}/{}", value.numer(), value.denom()))
}

/// Parses `display` output: a decimal or `n/d`.
pub fn parse_display(text: &str) -> Option<Rational> {
    match text.split_once('/') {
        Some((n, d)) => {
            let (n, d): (BigInt, BigInt) = (n.parse().ok()?, d.parse().ok()?);
            (!d.is_zero()).then(|| Rational::new(n, d))
        }
        None => parse_decimal(text),
    }
}

/// Serde adapter writing a rational as its `display` string, so JSON stays
/// exact and readable.
pub mod as_string {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    use super::{display, parse_display, Rational};

    pub fn serialize<S: Serializer>(value: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&display(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let text = String::deserialize(d)?;
        parse_display(&text).ok_or_else(|| D::Error::custom(format!("`{text}` is not a rational number")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(parse_decimal("5"), Some(int(5)));
        assert_eq!(parse_decimal("-3"), Some(int(-3)));
        assert_eq!(parse_decimal("0.25"), Some(ratio(1, 4)));
        assert_eq!(parse_decimal("5.23"), Some(ratio(523, 100)));
        assert_eq!(parse_decimal(".5"), Some(ratio(1, 2)));
        assert_eq!(parse_decimal("1."), None);
        assert_eq!(parse_decimal("abc"), None);
        assert_eq!(parse_decimal("-"), None);
        assert_eq!(parse_decimal("1e3"), None);
    }

    #[test]
    fn renders_shortest_decimal() {
        assert_eq!(to_decimal(&int(7)).unwrap(), "7");
        assert_eq!(to_decimal(&ratio(1, 4)).unwrap(), "0.25");
        assert_eq!(to_decimal(&ratio(-3, 2)).unwrap(), "-1.5");
        assert_eq!(to_decimal(&ratio(523, 100)).unwrap(), "5.23");
        assert_eq!(to_decimal(&ratio(1, 20)).unwrap(), "0.05");
        assert_eq!(to_decimal(&ratio(1, 3)), None);
        assert_eq!(display(&ratio(1, 3)), "1/3");
    }

    #[test]
    fn display_round_trip() {
        for v in [ratio(1, 3), ratio(-7, 2), int(0), ratio(523, 100)] {
            assert_eq!(parse_display(&display(&v)), Some(v));
        }
        assert_eq!(parse_display("1/0"), None);
    }

    #[test]
    fn decimal_round_trip() {
        for text in ["0", "12", "-0.5", "3.125", "100.01"] {
            let v = parse_decimal(text).unwrap();
            assert_eq!(parse_decimal(&to_decimal(&v).unwrap()).unwrap(), v);
        }
    }
}
