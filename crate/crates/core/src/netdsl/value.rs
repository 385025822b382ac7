//! SPICE-style numeric literals: `10k`, `3E5`, `.05`, `2meg`, `1.5u`.
//!
//! Suffix scaling is applied on the decimal exponent before conversion, so
//! `50m` and `0.05` parse to the same `f64`.

use crate::error::{Error, Result};

const SUFFIXES: &[(&str, i32)] = &[("meg", 6), ("k", 3), ("m", -3), ("u", -6), ("n", -9), ("p", -12)];

/// Parse a literal with an optional magnitude suffix (case-insensitive).
pub fn parse_value(token: &str) -> Result<f64> {
    let bad = || Error::Literal(token.to_string());
    let lower = token.to_ascii_lowercase();
    let (body, scale) = split_suffix(&lower);
    let (sign, rest) = match body.as_bytes().first() {
        Some(b'-') => ("-", &body[1..]),
        Some(b'+') => ("", &body[1..]),
        _ => ("", body),
    };
    let (mantissa, exp) = match rest.find('e') {
        Some(i) => {
            let e = &rest[i + 1..];
            let digits = e.strip_prefix(['+', '-']).unwrap_or(e);
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            (&rest[..i], e.parse::<i32>().map_err(|_| bad())?)
        }
        None => (rest, 0),
    };
    let mut parts = mantissa.splitn(2, '.');
    let int = parts.next().unwrap_or("");
    let frac = parts.next();
    let digits_ok = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    if !digits_ok(int) || !frac.is_none_or(digits_ok) {
        return Err(bad());
    }
    if int.is_empty() && frac.is_none_or(str::is_empty) {
        return Err(bad());
    }
    let exp = exp.checked_add(scale).ok_or_else(bad)?;
    let text = format!("{sign}{mantissa}e{exp}");
    let v: f64 = text.parse().map_err(|_| bad())?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

fn split_suffix(s: &str) -> (&str, i32) {
    for (suffix, scale) in SUFFIXES {
        if let Some(body) = s.strip_suffix(suffix) {
            // `1e` + `m` style ambiguity does not arise: a bare trailing `e` is rejected later.
            if !body.is_empty() {
                return (body, *scale);
            }
        }
    }
    (s, 0)
}

/// Canonical literal: shortest digits, engineering suffix where one fits.
/// `parse_value(&format_value(x)) == x` for every finite `x`.
pub fn format_value(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:e}", x.abs());
    let (digits, exp) = sci.split_once('e').expect("`{:e}` always has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits: String = digits.chars().filter(|c| *c != '.').collect();
    let sign = if x < 0.0 { "-" } else { "" };

    let eng = exp.div_euclid(3) * 3;
    let suffix = match eng {
        6 => "meg",
        3 => "k",
        0 => "",
        -3 => "m",
        -6 => "u",
        -9 => "n",
        -12 => "p",
        _ => return format!("{sign}{}", sci),
    };
    // value = 0.d1d2d3... * 10^(exp+1); place the decimal point `exp - eng + 1` digits in.
    let point = (exp - eng + 1) as usize;
    let mantissa = if digits.len() <= point {
        format!("{digits}{}", "0".repeat(point - digits.len()))
    } else {
        format!("{}.{}", &digits[..point], &digits[point..])
    };
    format!("{sign}{mantissa}{suffix}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn suffixes() {
        assert_eq!(parse_value("10k").unwrap(), 1.0e4);
        assert_eq!(parse_value("3E5").unwrap(), 3.0e5);
        assert_eq!(parse_value("2meg").unwrap(), 2.0e6);
        assert_eq!(parse_value("2MEG").unwrap(), 2.0e6);
        assert_eq!(parse_value("5m").unwrap(), 5e-3);
        assert_eq!(parse_value("5M").unwrap(), 5e-3);
        assert_eq!(parse_value("1.5u").unwrap(), 1.5e-6);
        assert_eq!(parse_value("3n").unwrap(), 3e-9);
        assert_eq!(parse_value("7p").unwrap(), 7e-12);
        assert_eq!(parse_value(".05").unwrap(), 0.05);
        assert_eq!(parse_value("50m").unwrap(), 0.05);
        assert_eq!(parse_value("10E-7").unwrap(), 1e-6);
        assert_eq!(parse_value("-1.5").unwrap(), -1.5);
        assert_eq!(parse_value("+2").unwrap(), 2.0);
        assert_eq!(parse_value("1e3k").unwrap(), 1e6);
    }

    #[test]
    fn malformed() {
        for t in ["", "k", "1.2.3", "abc", "1e", "1e+", "10kk", "1x", "--1", ".", "1 0", "e5", "1g"] {
            assert!(parse_value(t).is_err(), "{t} should be rejected");
        }
    }

    #[test]
    fn canonical_form() {
        assert_eq!(format_value(10000.0), "10k");
        assert_eq!(format_value(3e5), "300k");
        assert_eq!(format_value(0.05), "50m");
        assert_eq!(format_value(1.5), "1.5");
        assert_eq!(format_value(200.0), "200");
        assert_eq!(format_value(2.5e6), "2.5meg");
        assert_eq!(format_value(-0.7), "-700m");
        assert_eq!(format_value(1e-15), "1e-15");
        assert_eq!(format_value(0.0), "0");
    }

    proptest! {
        #[test]
        fn format_parse_roundtrip(x in prop::num::f64::NORMAL) {
            prop_assert_eq!(parse_value(&format_value(x)).unwrap(), x);
        }
    }
}
