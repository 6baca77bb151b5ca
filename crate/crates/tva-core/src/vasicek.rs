//! Gaussian mean-reverting short-rate model with closed-form bonds and
//! caplets.

use crate::curve::InitialCurve;
use crate::error::{Error, Result};
use crate::math::norm_cdf;

/// dr = a (level - r) dt + sigma dW under the pricing measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VasicekParams {
    pub a: f64,
    pub level: f64,
    pub sigma: f64,
    pub r0: f64,
}

impl VasicekParams {
    pub fn new(a: f64, level: f64, sigma: f64, r0: f64) -> Result<Self> {
        let p = VasicekParams { a, level, sigma, r0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0) {
            return Err(Error::invalid(format!("mean reversion a={} must be positive", self.a)));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::invalid(format!("sigma={} must be nonnegative", self.sigma)));
        }
        if !self.level.is_finite() || !self.r0.is_finite() {
            return Err(Error::invalid("vasicek parameters must be finite"));
        }
        Ok(())
    }

    /// The time-zero curve generated by this model.
    pub fn initial_curve(&self) -> InitialCurve {
        InitialCurve {
            a: self.a,
            level: self.level,
            sigma: self.sigma,
            r0: self.r0,
        }
    }

    /// Affine bond coefficients: B(t, T) = exp(m + n r_t).
    pub fn bond_coeffs(&self, t: f64, maturity: f64) -> Result<(f64, f64)> {
        if !(t <= maturity) {
            return Err(Error::invalid(format!(
                "bond coefficients need t <= maturity, got t={t}, maturity={maturity}"
            )));
        }
        let a = self.a;
        let s = maturity - t;
        let decay = 1.0 - (-a * s).exp();
        let n = -decay / a;
        let rinf = self.level - self.sigma * self.sigma / (2.0 * a * a);
        let m = rinf * (decay / a - s) - self.sigma * self.sigma * decay * decay / (4.0 * a * a * a);
        Ok((m, n))
    }

    /// Zero-coupon bond price at time t given the short rate r.
    pub fn bond(&self, t: f64, maturity: f64, r: f64) -> Result<f64> {
        let (m, n) = self.bond_coeffs(t, maturity)?;
        Ok((m + n * r).exp())
    }

    /// Time-zero price of a caplet on the simple rate over
    /// [expiry, expiry + period] struck at `rate`, settled in arrears and
    /// expressed per unit notional.
    ///
    /// The caplet is the scaled bond put (1 + period rate) many puts on
    /// B(expiry, expiry + period) struck at 1 / (1 + period rate), which is
    /// Gaussian-lognormal here and prices by the usual two-term formula.
    pub fn caplet(&self, expiry: f64, period: f64, rate: f64) -> Result<f64> {
        if !(expiry >= 0.0) || !(period > 0.0) {
            return Err(Error::invalid(format!(
                "caplet needs expiry >= 0 and period > 0, got {expiry}, {period}"
            )));
        }
        let curve = self.initial_curve();
        let accrual = 1.0 + period * rate;
        let b_near = curve.discount(expiry);
        let b_far = curve.discount(expiry + period);
        let a = self.a;
        // Integrated log-bond variance up to expiry.
        let xi2t = self.sigma * self.sigma / (2.0 * a * a * a)
            * (1.0 - (-2.0 * a * expiry).exp())
            * (1.0 - (-a * period).exp()).powi(2);
        if xi2t <= 0.0 {
            return Ok((b_near - accrual * b_far).max(0.0));
        }
        let vol = xi2t.sqrt();
        let log_moneyness = (accrual * b_far / b_near).ln();
        let d_plus = log_moneyness / vol + 0.5 * vol;
        let d_minus = log_moneyness / vol - 0.5 * vol;
        Ok(b_near * norm_cdf(-d_minus) - accrual * b_far * norm_cdf(-d_plus))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{gauss_legendre, integrate};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn standard_params() -> VasicekParams {
        VasicekParams::new(0.25, 0.05, 0.004, 0.02).unwrap()
    }

    const SWAP_RATE: f64 = 0.038858692653552623;

    #[test]
    fn bond_at_maturity_is_one() {
        let p = standard_params();
        for t in [0.0, 1.5, 7.0] {
            assert_abs_diff_eq!(p.bond(t, t, 0.033).unwrap(), 1.0, epsilon = 1e-15);
        }
        assert!(p.bond(5.0, 4.0, 0.02).is_err());
    }

    #[test]
    fn bond_coefficients_reference_values() {
        let p = standard_params();
        let (m, n) = p.bond_coeffs(0.0, 10.0).unwrap();
        assert_relative_eq!(m, -0.31582266960062065, max_relative = 1e-13);
        assert_relative_eq!(n, -3.6716600055044048, max_relative = 1e-13);
        assert_relative_eq!(
            p.bond(5.0, 10.0, 0.03).unwrap(),
            0.8246666651009013,
            max_relative = 1e-13
        );
    }

    #[test]
    fn time_zero_bonds_match_curve() {
        let p = standard_params();
        let c = p.initial_curve();
        for t in 1..=10 {
            let t = t as f64;
            assert_relative_eq!(p.bond(0.0, t, p.r0).unwrap(), c.discount(t), max_relative = 1e-13);
        }
    }

    // ── caplets ─────────────────────────────────────────────────────────

    /// Independent caplet valuation: the pair (r_T, int_0^T r dt) is jointly
    /// Gaussian with known moments, so the price is a one-dimensional
    /// integral of the payoff against the conditional discount factor.
    fn caplet_by_quadrature(p: &VasicekParams, expiry: f64, period: f64, rate: f64) -> f64 {
        let (a, k, sigma, r0) = (p.a, p.level, p.sigma, p.r0);
        let t = expiry;
        let e1 = 1.0 - (-a * t).exp();
        let e2 = 1.0 - (-2.0 * a * t).exp();
        let mu_r = k + (r0 - k) * (-a * t).exp();
        let var_r = sigma * sigma * e2 / (2.0 * a);
        let mu_i = k * t + (r0 - k) * e1 / a;
        let var_i = sigma * sigma / (a * a) * (t - 2.0 * e1 / a + e2 / (2.0 * a));
        let cov = sigma * sigma / (2.0 * a * a) * e1 * e1;

        let (m, n) = p.bond_coeffs(t, t + period).unwrap();
        let accrual = 1.0 + period * rate;

        // The payoff 1 - accrual exp(m + n r) is positive exactly above the
        // kink rate; integrating only there keeps the integrand smooth so
        // Gauss-Legendre converges spectrally.
        let r_star = (-accrual.ln() - m) / n;
        let sd = var_r.sqrt();
        let lo = (mu_r - 10.0 * sd).max(r_star);
        let hi = mu_r + 12.0 * sd;
        if lo >= hi {
            return 0.0;
        }
        let (nodes, weights) = gauss_legendre(2000);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (lo + hi);
        let mut acc = 0.0;
        for (x, w) in nodes.iter().zip(&weights) {
            let r = mid + half * x;
            let dens = (-0.5 * (r - mu_r) * (r - mu_r) / var_r).exp()
                / (sd * (2.0 * std::f64::consts::PI).sqrt());
            let cond_mean = mu_i + cov / var_r * (r - mu_r);
            let cond_var = var_i - cov * cov / var_r;
            let disc = (-cond_mean + 0.5 * cond_var).exp();
            acc += w * dens * disc * (1.0 - accrual * (m + n * r).exp());
        }
        half * acc
    }

    #[test]
    fn caplet_reference_values() {
        // Computed with arbitrary precision arithmetic; strike is the
        // ten-year par swap rate of the shared curve.
        let expected = [
            0.0,
            2.3023231569657e-6,
            2.7642205052483e-4,
            1.3118207477467e-3,
            2.7017150453338e-3,
            3.9832328443757e-3,
            4.9825991912073e-3,
            5.6872184703771e-3,
            6.1402402469038e-3,
            6.3952373680519e-3,
        ];
        let p = standard_params();
        let mut total = 0.0;
        for (i, want) in expected.iter().enumerate() {
            let got = p.caplet(i as f64, 1.0, SWAP_RATE).unwrap();
            if *want == 0.0 {
                assert_abs_diff_eq!(got, 0.0, epsilon = 1e-15);
            } else {
                assert_relative_eq!(got, *want, max_relative = 1e-11);
            }
            total += got;
        }
        assert_relative_eq!(total, 0.031480788287678, max_relative = 1e-11);
    }

    #[test]
    fn caplet_matches_quadrature_oracle() {
        let p = standard_params();
        for expiry in [1.0, 4.0, 9.0] {
            let closed = p.caplet(expiry, 1.0, SWAP_RATE).unwrap();
            let quad = caplet_by_quadrature(&p, expiry, 1.0, SWAP_RATE);
            assert_relative_eq!(closed, quad, max_relative = 1e-8);
        }
    }

    #[test]
    fn caplet_degenerate_cases() {
        let p = standard_params();
        // Far in the money at zero volatility: discounted intrinsic value.
        let flat = VasicekParams::new(0.25, 0.05, 0.0, 0.02).unwrap();
        let c = flat.initial_curve();
        let got = flat.caplet(5.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(got, c.discount(5.0) - c.discount(6.0), max_relative = 1e-13);
        // Hopelessly out of the money.
        assert_abs_diff_eq!(p.caplet(5.0, 1.0, 5.0).unwrap(), 0.0, epsilon = 1e-16);
        // Immediate expiry on a par-struck caplet: the front fixing is below
        // the strike, so the payoff is zero.
        assert_abs_diff_eq!(p.caplet(0.0, 1.0, SWAP_RATE).unwrap(), 0.0, epsilon = 1e-16);
        assert!(p.caplet(-1.0, 1.0, 0.02).is_err());
        assert!(p.caplet(1.0, 0.0, 0.02).is_err());
    }

    #[test]
    fn quadrature_oracle_reprices_discount_bond() {
        // Internal consistency of the oracle itself: with the payoff
        // replaced by 1 the integral must return B(0, T).
        let p = standard_params();
        let c = p.initial_curve();
        let t = 5.0;
        let int_f = integrate(|s| c.forward(s), 0.0, t, 128);
        assert_relative_eq!(int_f.exp().recip(), c.discount(t), max_relative = 1e-12);
    }
}
