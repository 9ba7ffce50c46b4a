//! Numeric formatting for the text artifacts.
//!
//! Every value written to an embedding, transform, table, or score file goes
//! through [`sig6`]: six significant digits, decimal notation for moderate
//! exponents and scientific otherwise. Parsing accepts any finite decimal or
//! scientific literal, so `load(save(x))` agrees with `x` to the printed
//! precision.

/// Format with 6 significant digits.
pub fn sig6(x: f64) -> String {
    format_sig(x, 6)
}

fn format_sig(x: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        // Round-trippable via Rust's own parser; never produced by healthy runs.
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if exp >= digits as i32 || exp < -5 {
        let s = format!("{:.*e}", digits - 1, x);
        return trim_scientific(&s);
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    trim_decimal(&s)
}

fn trim_decimal(s: &str) -> String {
    if !s.contains('.') {
        return s.to_string();
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t == "-" || t.is_empty() {
        "0".to_string()
    } else {
        t.to_string()
    }
}

// Rust prints `1.20000e3`; drop trailing zeros in the mantissa.
fn trim_scientific(s: &str) -> String {
    match s.split_once('e') {
        Some((mant, exp)) => format!("{}e{}", trim_decimal(mant), exp),
        None => s.to_string(),
    }
}

/// Parse one whitespace-free numeric field.
pub fn parse_value(field: &str) -> Option<f64> {
    field.parse::<f64>().ok().filter(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moderate_values_use_decimal_notation() {
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(-1.0), "-1");
        assert_eq!(sig6(0.5), "0.5");
        assert_eq!(sig6(1.0 / 3.0), "0.333333");
        assert_eq!(sig6(-0.125), "-0.125");
        assert_eq!(sig6(123456.0), "123456");
        assert_eq!(sig6(0.001234567), "0.00123457");
    }

    #[test]
    fn extreme_values_use_scientific_notation() {
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(1e-7), "1e-7");
        assert_eq!(sig6(-2.5e12), "-2.5e12");
    }

    #[test]
    fn zero_is_plain() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(-0.0), "0");
    }

    #[test]
    fn round_trip_is_within_print_precision() {
        for &x in &[
            std::f64::consts::PI,
            -1.0 / 7.0,
            123456.789,
            1e-9,
            0.30000000000000004,
        ] {
            let back = parse_value(&sig6(x)).unwrap();
            let rel = ((back - x) / x).abs();
            assert!(rel < 1e-5, "{x} -> {} -> {back}", sig6(x));
        }
    }

    #[test]
    fn parse_rejects_junk_and_nonfinite() {
        assert_eq!(parse_value("abc"), None);
        assert_eq!(parse_value("NaN"), None);
        assert_eq!(parse_value("inf"), None);
        assert_eq!(parse_value("1.5e3"), Some(1500.0));
    }
}
