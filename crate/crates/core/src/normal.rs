//! Standard normal helpers shared by the total-variation bounds and the
//! coupling code.

use libm::{erf, erfc};
use std::f64::consts::SQRT_2;

/// Standard normal CDF.
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// `1 - 2 Φ(-s)` for `s >= 0`, evaluated as `erf(s/√2)` so small arguments keep
/// full relative precision.
pub fn one_minus_two_cdf_neg(s: f64) -> f64 {
    erf(s / SQRT_2)
}

/// Standard normal density.
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        // Tabulated values of Φ.
        assert!((cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((cdf(-1.0) - 0.158_655_253_931_457_05).abs() < 1e-13);
        assert!((cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-13);
        assert!((cdf(-3.0) - 0.001_349_898_031_630_094_6).abs() < 1e-13);
    }

    #[test]
    fn reflected_form_matches_cdf() {
        for i in 0..200 {
            let s = i as f64 * 0.05;
            let direct = 1.0 - 2.0 * cdf(-s);
            assert!((one_minus_two_cdf_neg(s) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn linearization_dominates() {
        // 1 - 2Φ(-s) <= s (2/π)^{1/2}
        let slope = (2.0 / std::f64::consts::PI).sqrt();
        for i in 1..=2000 {
            let s = i as f64 * 0.005;
            assert!(one_minus_two_cdf_neg(s) <= s * slope + 1e-15, "s = {s}");
        }
    }
}
