//! Angular frequencies written either as a number in rad/s or as a short
//! product expression with an optional unit, for example `"2pi*5e9 Hz"`,
//! `"5 GHz"` or `"3.14159e10 rad/s"`. Hz-family units are converted with 2π.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Deserializer};

/// Parse an angular-frequency expression into rad/s.
pub fn parse_angular_frequency(text: &str) -> Result<f64, String> {
    let s = text.trim();
    let units: [(&str, f64); 5] = [
        ("rad/s", 1.0),
        ("GHz", TAU * 1e9),
        ("MHz", TAU * 1e6),
        ("kHz", TAU * 1e3),
        ("Hz", TAU),
    ];
    let (expr, scale) = units
        .iter()
        .find_map(|&(u, f)| s.strip_suffix(u).map(|rest| (rest.trim(), f)))
        .unwrap_or((s, 1.0));
    if expr.is_empty() {
        return Err(format!("`{text}` has a unit but no value"));
    }
    let (mut value, expr) = match expr.strip_prefix('-') {
        Some(rest) => (-scale, rest),
        None => (scale, expr),
    };
    for factor in expr.split('*') {
        let f = factor.trim();
        value *= match f {
            "pi" | "π" => PI,
            "2pi" | "2π" => TAU,
            _ => f
                .parse::<f64>()
                .map_err(|_| format!("`{f}` in `{text}` is not a number, `pi` or `2pi`"))?,
        };
    }
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("`{text}` is not finite"))
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Raw {
    Number(f64),
    Integer(i64),
    Text(String),
}

pub(crate) fn deserialize_frequency<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    match Option::<Raw>::deserialize(d)? {
        None => Ok(None),
        Some(Raw::Number(x)) => Ok(Some(x)),
        Some(Raw::Integer(x)) => Ok(Some(x as f64)),
        Some(Raw::Text(t)) => parse_angular_frequency(&t).map(Some).map_err(serde::de::Error::custom),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forms() {
        let d = TAU * 5e9;
        for s in ["2pi*5e9", "5e9*2pi", "5e9 Hz", "5 GHz", "2π * 5e9", "31415926535.897932 rad/s"] {
            let v = parse_angular_frequency(s).unwrap();
            assert!((v / d - 1.0).abs() < 1e-15, "{s}: {v}");
        }
        assert_eq!(parse_angular_frequency("-2pi*1e9").unwrap(), -TAU * 1e9);
        assert_eq!(parse_angular_frequency("1e3").unwrap(), 1e3);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_angular_frequency("five GHz").is_err());
        assert!(parse_angular_frequency("GHz").is_err());
        assert!(parse_angular_frequency("2pi*").is_err());
    }
}
