//! Text formatting shared by every CSV/JSON writer.

/// Formats a float with nine significant digits in a fixed scientific layout,
/// so identical values always print identically.
pub fn sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0.00000000e0".to_string();
    }
    format!("{:.8e}", x)
}

/// Rounds to nine significant digits; used before values go into JSON.
pub fn round9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    sig9(x).parse().unwrap_or(x)
}
