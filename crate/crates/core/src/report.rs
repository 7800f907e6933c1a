//! Small helpers shared by the table writers.

/// `x` with six significant digits; scientific notation outside
/// `[1e-4, 1e6)`.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    if (-4..6).contains(&magnitude) {
        let decimals = (5 - magnitude).max(0) as usize;
        let text = format!("{x:.decimals$}");
        // Rounding can carry into a new digit (9.999995 → 10.00000).
        let digits = text.chars().filter(|c| c.is_ascii_digit()).count();
        let leading_zeros = text
            .trim_start_matches('-')
            .chars()
            .take_while(|c| *c == '0' || *c == '.')
            .filter(|c| *c == '0')
            .count();
        if digits - leading_zeros > 6 && decimals > 0 {
            return format!("{x:.prec$}", prec = decimals - 1);
        }
        text
    } else {
        format!("{x:.5e}")
    }
}

/// CSV cell for an optional number; empty when absent.
pub fn sig6_opt(x: Option<f64>) -> String {
    x.map(sig6).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.98714412), "0.987144");
        assert_eq!(sig6(2.3244953), "2.32450");
        assert_eq!(sig6(-0.0012345678), "-0.00123457");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(9.9999996), "10.0000");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(3e-7), "3.00000e-7");
    }
}
