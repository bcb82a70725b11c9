//! Exact rational arithmetic for privacy budgets.
//!
//! Budget values enter the engine either as decimal literals or as symbolic
//! shares of the total budget. Both are converted to [`Rational`] so that
//! `epsilon_total / 14` summed fourteen times is exactly `epsilon_total`.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

/// Parses a plain decimal literal (`12`, `0.25`, `-3.5e-2`) into an exact rational.
pub fn parse_decimal(text: &str) -> Option<Rational> {
    let text = text.trim();
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], text[pos + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u8);
    let mut value = Rational::from_integer(numer);
    if scale >= 0 {
        value *= Rational::from_integer(num::pow(ten, scale as usize));
    } else {
        value /= Rational::from_integer(num::pow(ten, (-scale) as usize));
    }
    Some(if negative { -value } else { value })
}

/// Converts a float to the rational its shortest round-trip decimal denotes,
/// so `0.3` becomes exactly `3/10` rather than the binary approximation.
pub fn from_f64(x: f64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    parse_decimal(&format!("{x}"))
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Renders as `n` or `n/d`.
pub fn render(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn is_positive(r: &Rational) -> bool {
    r.is_positive()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn decimal_literals_are_exact() {
        assert_eq!(parse_decimal("0.3"), Some(q(3, 10)));
        assert_eq!(parse_decimal("12"), Some(q(12, 1)));
        assert_eq!(parse_decimal("-2.5e-1"), Some(q(-1, 4)));
        assert_eq!(parse_decimal("1e3"), Some(q(1000, 1)));
        assert_eq!(parse_decimal(".5"), Some(q(1, 2)));
        assert_eq!(parse_decimal("abc"), None);
        assert_eq!(parse_decimal(""), None);
    }

    #[test]
    fn floats_map_to_their_decimal_text() {
        assert_eq!(from_f64(0.1), Some(q(1, 10)));
        assert_eq!(from_f64(1e-7), Some(q(1, 10_000_000)));
        assert_eq!(from_f64(f64::INFINITY), None);
    }

    #[test]
    fn fourteen_shares_sum_back() {
        let total = q(1, 1);
        let share = &total / Rational::from_integer(BigInt::from(14));
        let sum = (0..14).fold(Rational::zero(), |acc, _| acc + &share);
        assert_eq!(sum, total);
        assert_eq!(render(&share), "1/14");
    }
}
