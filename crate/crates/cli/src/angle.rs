/// Parses an angle given in radians, or in degrees with a `deg` or `°`
/// suffix (`22.5deg`, `90°`). A `rad` suffix is accepted and ignored.
pub fn parse_angle(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let (num, degrees) = if let Some(n) = t.strip_suffix("deg") {
        (n, true)
    } else if let Some(n) = t.strip_suffix('°') {
        (n, true)
    } else if let Some(n) = t.strip_suffix("rad") {
        (n, false)
    } else {
        (t, false)
    };
    let v: f64 = num.trim().parse().map_err(|_| format!("invalid angle {s:?}"))?;
    if !v.is_finite() {
        return Err(format!("invalid angle {s:?}"));
    }
    Ok(if degrees { v.to_radians() } else { v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn units() {
        assert_eq!(parse_angle("1.5").unwrap(), 1.5);
        assert!((parse_angle("180deg").unwrap() - PI).abs() < 1e-15);
        assert!((parse_angle("22.5 deg").unwrap() - PI / 8.0).abs() < 1e-15);
        assert!((parse_angle("90°").unwrap() - PI / 2.0).abs() < 1e-15);
        assert_eq!(parse_angle("0.25rad").unwrap(), 0.25);
        assert!(parse_angle("ninety").is_err());
        assert!(parse_angle("inf").is_err());
    }
}
