//! Number formatting shared by every emitted report.

/// Formats a float with 12 significant digits in scientific notation.
///
/// A fixed format keeps regression diffs of CSV bodies meaningful.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    // Normalise -0 so that sign noise never shows up in diffs.
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.11e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_f64(0.59049), "5.90490000000e-1");
        assert_eq!(fmt_f64(-0.0), "0.00000000000e0");
        assert_eq!(fmt_f64(1.0 / 3.0), "3.33333333333e-1");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }
}
