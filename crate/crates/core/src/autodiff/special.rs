//! Complementary error function and its derivative.

use std::f64::consts::PI;

/// `erfc(x)` via libm's rational approximation (error well under 1e-15).
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// `d/dx erfc(x) = -(2/√π)·exp(-x²)`, evaluated in closed form.
pub fn erfc_derivative(x: f64) -> f64 {
    -2.0 / PI.sqrt() * (-x * x).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson quadrature of (2/√π)∫_x^∞ exp(-t²) dt, truncated at x+12.
    fn erfc_quadrature(x: f64) -> f64 {
        let (a, b) = (x, x + 12.0);
        let n = 20_000;
        let h = (b - a) / n as f64;
        let f = |t: f64| (-t * t).exp();
        let mut s = f(a) + f(b);
        for i in 1..n {
            let t = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(t);
        }
        2.0 / PI.sqrt() * s * h / 3.0
    }

    #[test]
    fn erfc_at_zero_is_one() {
        assert_eq!(erfc(0.0), 1.0);
    }

    #[test]
    fn erfc_matches_quadrature() {
        for &x in &[-3.0, -1.2, -0.3, 0.1, 0.5, 1.0, 2.0, 3.5, 5.0] {
            let q = erfc_quadrature(x);
            assert!((erfc(x) - q).abs() <= 1.5e-7, "x={x}: {} vs {q}", erfc(x));
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        let x = 0.5;
        let h = 1e-5;
        let fd = (erfc(x + h) - erfc(x - h)) / (2.0 * h);
        let an = erfc_derivative(x);
        assert!(((fd - an) / an).abs() < 1e-6, "{fd} vs {an}");
    }
}
