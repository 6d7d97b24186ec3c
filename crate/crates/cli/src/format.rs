//! Number formatting and range parsing shared by the writers.

use crate::CliError;

/// Rounds to `digits` significant digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .unwrap_or(x)
}

/// `x` with `digits` significant digits, plain notation for moderate
/// magnitudes and exponent notation otherwise.
pub fn sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r = round_sig(x, digits);
    if r == 0.0 {
        return "0".into();
    }
    let a = r.abs();
    if (1e-4..1e9).contains(&a) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

/// The nine-digit form used in every data file.
pub fn num(x: f64) -> String {
    sig(x, 9)
}

/// Parses `a:b:step` (inclusive of b up to rounding) or a single value.
pub fn parse_range(text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    let parse = |s: &str| -> Result<f64, CliError> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| CliError::Validation(format!("not a number: {s:?} in {text:?}")))
    };
    match parts.as_slice() {
        [one] => Ok(vec![parse(one)?]),
        [a, b, step] => {
            let (a, b, step) = (parse(a)?, parse(b)?, parse(step)?);
            if !(step > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
                return Err(CliError::Validation(format!(
                    "range {text:?} needs finite a ≤ b and step > 0"
                )));
            }
            let count = ((b - a) / step + 1e-9).floor() as usize + 1;
            if count > 10_000_000 {
                return Err(CliError::Validation(format!(
                    "range {text:?} has too many points"
                )));
            }
            Ok((0..count).map(|i| a + i as f64 * step).collect())
        }
        _ => Err(CliError::Validation(format!(
            "expected a value or a:b:step, got {text:?}"
        ))),
    }
}

/// Parses a comma-separated list in which each item is a value or range.
pub fn parse_levels(text: &str) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    for item in text.split(',').filter(|s| !s.trim().is_empty()) {
        out.extend(parse_range(item)?);
    }
    if out.is_empty() {
        return Err(CliError::Validation("empty level list".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_digits() {
        assert_eq!(num(0.1), "0.1");
        assert_eq!(num(-0.125), "-0.125");
        assert_eq!(num(2.073_132_185_1), "2.07313219");
        assert_eq!(num(1.0 / 3.0), "0.333333333");
        assert_eq!(num(1.234_567_891_2e-7), "1.23456789e-7");
        assert_eq!(num(6.02e23), "6.02e23");
        assert_eq!(num(-0.0), "0");
        assert_eq!(num(100.0), "100");
    }

    #[test]
    fn twelve_digit_rounding() {
        assert_eq!(round_sig(-0.052_942_934_567_891, 12), -0.0529429345679);
    }

    #[test]
    fn ranges() {
        let r = parse_range("10:100:10").unwrap();
        assert_eq!(r.len(), 10);
        assert_eq!(r[9], 100.0);
        assert_eq!(parse_range("0.5").unwrap(), vec![0.5]);
        assert_eq!(parse_range("0:1:0.1").unwrap().len(), 11);
        assert!(parse_range("1:0:0.1").is_err());
        assert!(parse_range("0:1:0").is_err());
        assert!(parse_range("a").is_err());
        assert_eq!(parse_levels("10,30:50:20").unwrap(), vec![10.0, 30.0, 50.0]);
    }
}
