//! Fixed-precision number text shared by every writer.

use std::fmt::Write;

pub const SIGNIFICANT_DIGITS: usize = 9;

/// `v` with nine significant digits: positional notation for decimal exponents
/// in `-5..9`, scientific otherwise. Zero (of either sign) is `0.000000000`.
pub fn fmt9(v: f64) -> String {
    let mut s = String::new();
    push_fmt9(&mut s, v);
    s
}

pub fn push_fmt9(out: &mut String, v: f64) {
    if v == 0.0 {
        out.push_str("0.000000000");
        return;
    }
    if !v.is_finite() {
        let _ = write!(out, "{v}");
        return;
    }
    // The exponent after rounding to nine digits decides the notation.
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v);
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..].parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp) as usize;
        let _ = write!(out, "{:.*}", decimals, v);
    } else {
        out.push_str(&sci);
    }
}

/// Space-joined [`fmt9`] values.
pub fn join9(values: impl IntoIterator<Item = f64>) -> String {
    let mut s = String::new();
    for (i, v) in values.into_iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        push_fmt9(&mut s, v);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt9(0.0), "0.000000000");
        assert_eq!(fmt9(-0.0), "0.000000000");
        assert_eq!(fmt9(2.0), "2.00000000");
        assert_eq!(fmt9(-1.5), "-1.50000000");
        assert_eq!(fmt9(0.1), "0.100000000");
        assert_eq!(fmt9(123456789.0), "123456789");
        assert_eq!(fmt9(1234567890.0), "1.23456789e9");
        assert_eq!(fmt9(1.5e-7), "1.50000000e-7");
        assert_eq!(fmt9(1.2345e-5), "0.0000123450000");
        // Rounding that carries into the next decade.
        assert_eq!(fmt9(9.999999999), "10.0000000");
        assert_eq!(join9([1.0, 0.0]), "1.00000000 0.000000000");
    }

    #[test]
    fn roundtrip_within_nine_digits() {
        for &v in &[std::f64::consts::PI, -2.718281828459045e-12, 6.02214076e23, 0.333333333333] {
            let back: f64 = fmt9(v).parse().unwrap();
            assert!((back - v).abs() <= 5e-9 * v.abs(), "{v} -> {back}");
        }
    }
}
