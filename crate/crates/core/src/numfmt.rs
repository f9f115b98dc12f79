//! Number rounding and formatting for reports.

use serde_json::Value;

/// `x` rounded to `digits` significant digits.
pub fn round_significant(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap_or(x)
}

/// Fixed notation for moderate magnitudes, scientific otherwise.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    // exponent of the rounded value, so 0.9999999 prints as 1.00000
    let exp: i32 = format!("{:.*e}", digits.saturating_sub(1), x).split('e').nth(1).and_then(|e| e.parse().ok()).unwrap_or(0);
    if (-4..6).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{:.*e}", digits.saturating_sub(1), x)
    }
}

/// Rounds every floating-point number in a JSON tree.
pub fn round_json(v: &mut Value, digits: usize) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(|x| round_significant(x, digits)).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|x| round_json(x, digits)),
        Value::Object(map) => map.values_mut().for_each(|x| round_json(x, digits)),
        _ => {}
    }
}

/// Serde adapter writing non-finite numbers as `null` and reading `null`
/// back as NaN.
pub mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_up_to_the_next_decade_keeps_the_digit_count() {
        assert_eq!(format_significant(0.99999999, 6), "1.00000");
        assert_eq!(format_significant(-9.9999999, 6), "-10.0000");
        assert_eq!(format_significant(999999.7, 6), "1.00000e6");
        assert_eq!(format_significant(0.5, 6), "0.500000");
    }

    #[test]
    fn significant_digits() {
        assert_eq!(round_significant(1.0 / 3.0, 12), 0.333333333333);
        assert_eq!(round_significant(123456.789, 3), 123000.0);
        assert_eq!(format_significant(0.56092134, 6), "0.560921");
        assert_eq!(format_significant(3.0, 6), "3.00000");
        assert_eq!(format_significant(1.5e-9, 6), "1.50000e-9");
        assert_eq!(format_significant(-2.5e7, 6), "-2.50000e7");
        assert_eq!(format_significant(f64::NAN, 6), "nan");
    }

    #[test]
    fn json_rounding_keeps_integers() {
        let mut v = serde_json::json!({"a": [1.0 / 7.0, 3], "b": {"c": 2.0 / 3.0}});
        round_json(&mut v, 4);
        assert_eq!(v, serde_json::json!({"a": [0.1429, 3], "b": {"c": 0.6667}}));
    }
}
