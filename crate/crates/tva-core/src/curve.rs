//! Initial term structure of interest rates.
//!
//! Both short-rate models are fitted to the same time-zero curve, taken in
//! the exponentially mean-reverting Gaussian family so that zero rates,
//! discount factors, instantaneous forwards and the forward slope all have
//! closed forms.

use crate::error::{Error, Result};

/// Time-zero yield curve generated by a Gaussian mean-reverting short rate
/// with speed `a`, long-run level `level`, volatility `sigma` and initial
/// value `r0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialCurve {
    pub a: f64,
    pub level: f64,
    pub sigma: f64,
    pub r0: f64,
}

impl InitialCurve {
    pub fn new(a: f64, level: f64, sigma: f64, r0: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::invalid(format!("mean reversion speed a={a} must be positive")));
        }
        if !(sigma >= 0.0) {
            return Err(Error::invalid(format!("volatility sigma={sigma} must be nonnegative")));
        }
        if !level.is_finite() || !r0.is_finite() {
            return Err(Error::invalid("curve parameters must be finite"));
        }
        Ok(InitialCurve { a, level, sigma, r0 })
    }

    /// Asymptotic continuously compounded yield.
    pub fn long_yield(&self) -> f64 {
        self.level - self.sigma * self.sigma / (2.0 * self.a * self.a)
    }

    /// Continuously compounded zero rate R(0, t).
    pub fn zero_rate(&self, t: f64) -> f64 {
        assert!(t >= 0.0, "zero_rate needs t >= 0, got {t}");
        if t < 1e-12 {
            return self.r0;
        }
        let a = self.a;
        let e = -(-a * t).exp_m1();
        let rinf = self.long_yield();
        rinf - (rinf - self.r0) * e / (a * t)
            + self.sigma * self.sigma * e * e / (4.0 * a * a * a * t)
    }

    /// Discount factor B(0, t) = exp(-t R(0, t)).
    pub fn discount(&self, t: f64) -> f64 {
        (-t * self.zero_rate(t)).exp()
    }

    /// Instantaneous forward rate f(0, t).
    pub fn forward(&self, t: f64) -> f64 {
        assert!(t >= 0.0, "forward needs t >= 0, got {t}");
        let a = self.a;
        let e = -(-a * t).exp_m1();
        self.level + (-a * t).exp() * (self.r0 - self.level)
            - self.sigma * self.sigma * e * e / (2.0 * a * a)
    }

    /// Time derivative of the instantaneous forward rate.
    pub fn forward_slope(&self, t: f64) -> f64 {
        assert!(t >= 0.0, "forward_slope needs t >= 0, got {t}");
        let a = self.a;
        let d = (-a * t).exp();
        -a * d * (self.r0 - self.level) - self.sigma * self.sigma / a * (1.0 - d) * d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::integrate;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn standard_curve() -> InitialCurve {
        InitialCurve::new(0.25, 0.05, 0.004, 0.02).unwrap()
    }

    #[test]
    fn short_end_matches_initial_rate() {
        let c = standard_curve();
        assert_abs_diff_eq!(c.zero_rate(0.0), 0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(c.zero_rate(1e-9), 0.02, epsilon = 1e-9);
        assert_abs_diff_eq!(c.forward(0.0), 0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(c.discount(0.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn discount_factors_reference_values() {
        // Computed independently with arbitrary precision arithmetic.
        let expected = [
            0.9768190305644467,
            0.9485993327851085,
            0.9170058710432157,
            0.8833273076466658,
            0.8485415655007215,
            0.8133775554197695,
            0.7783689338074284,
            0.7438987519770720,
            0.7102353947135314,
            0.6775608805258703,
        ];
        let c = standard_curve();
        for (i, want) in expected.iter().enumerate() {
            let t = (i + 1) as f64;
            assert_relative_eq!(c.discount(t), *want, max_relative = 1e-13);
        }
        assert_relative_eq!(c.zero_rate(10.0), 0.038925586971070875, max_relative = 1e-13);
    }

    #[test]
    fn forward_reference_values() {
        let c = standard_curve();
        assert_relative_eq!(c.forward(5.0), 0.04133969444236665, max_relative = 1e-13);
        assert_relative_eq!(c.forward_slope(5.0), 0.0021357031093643031, max_relative = 1e-12);
    }

    #[test]
    fn forward_integrates_to_zero_yield() {
        // t R(0, t) must equal the integral of the forward curve.
        let c = standard_curve();
        for t in [0.5, 1.0, 3.7, 10.0] {
            let int_f = integrate(|s| c.forward(s), 0.0, t, 64);
            assert_relative_eq!(int_f, t * c.zero_rate(t), max_relative = 1e-12);
        }
    }

    #[test]
    fn forward_slope_matches_finite_difference() {
        let c = standard_curve();
        for t in [0.1, 2.0, 5.0, 9.5] {
            let h = 1e-5;
            let fd = (c.forward(t + h) - c.forward(t - h)) / (2.0 * h);
            assert_relative_eq!(c.forward_slope(t), fd, max_relative = 1e-7);
        }
    }

    #[test]
    fn zero_volatility_reduces_to_deterministic_curve() {
        let c = InitialCurve::new(0.25, 0.05, 0.0, 0.02).unwrap();
        for t in [0.5f64, 2.0, 8.0] {
            // With sigma = 0 the forward curve is the deterministic
            // mean-reverting path of the short rate itself.
            let want = 0.05 + (0.02 - 0.05) * (-0.25 * t).exp();
            assert_relative_eq!(c.forward(t), want, max_relative = 1e-14);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(InitialCurve::new(0.0, 0.05, 0.004, 0.02).is_err());
        assert!(InitialCurve::new(-0.1, 0.05, 0.004, 0.02).is_err());
        assert!(InitialCurve::new(0.25, 0.05, -0.004, 0.02).is_err());
        assert!(InitialCurve::new(0.25, f64::NAN, 0.004, 0.02).is_err());
    }
}
