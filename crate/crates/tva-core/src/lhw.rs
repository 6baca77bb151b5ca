//! Short-rate model driven by an inverse-Gaussian Levy process, fitted to
//! the shared initial curve, with Fourier caplet pricing.

use num_complex::Complex64;

use crate::curve::InitialCurve;
use crate::error::{Error, Result};
use crate::math::gauss_legendre;

/// dr = alpha (drift_level(t) - r) dt + dZ, where Z is the pure-jump process
/// whose increments over dt have an inverse-Gaussian law with mean
/// dt / varsigma and shape dt^2. The time-dependent level is chosen so that
/// time-zero bonds reproduce `curve` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LhwParams {
    pub alpha: f64,
    pub varsigma: f64,
    pub curve: InitialCurve,
}

/// Quadrature and inversion settings for the Fourier caplet price.
#[derive(Debug, Clone, Copy)]
pub struct FourierGrid {
    /// Truncation of the oscillatory integral. The transform decays only
    /// like exp(-c sqrt(v)), so the cutoff must be generous.
    pub v_max: f64,
    /// Total Gauss-Legendre nodes, split over four geometrically graded
    /// panels of [0, v_max].
    pub v_nodes: usize,
    /// Gauss-Legendre nodes per year for the time integrals.
    pub s_nodes_per_year: usize,
    /// Damping line Re z = damping, must exceed 1.
    pub damping: f64,
}

impl Default for FourierGrid {
    fn default() -> Self {
        FourierGrid { v_max: 4000.0, v_nodes: 1024, s_nodes_per_year: 64, damping: 1.5 }
    }
}

impl LhwParams {
    pub fn new(alpha: f64, varsigma: f64, curve: InitialCurve) -> Result<Self> {
        let p = LhwParams { alpha, varsigma, curve };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::invalid(format!("mean reversion alpha={} must be positive", self.alpha)));
        }
        if !(self.varsigma > 0.0) {
            return Err(Error::invalid(format!("varsigma={} must be positive", self.varsigma)));
        }
        Ok(())
    }

    /// Cumulant transform of the driving process: E[exp(z Z_t)] = exp(t psi(z)),
    /// defined for z <= varsigma^2 / 2.
    pub fn cumulant(&self, z: f64) -> Result<f64> {
        let s = self.varsigma;
        let arg = 1.0 - 2.0 * z / (s * s);
        if arg < 0.0 {
            return Err(Error::domain(format!(
                "cumulant transform needs z <= varsigma^2/2 = {}, got z = {z}",
                0.5 * s * s
            )));
        }
        Ok(s * (1.0 - arg.sqrt()))
    }

    /// Derivative of the cumulant transform.
    pub fn cumulant_deriv(&self, z: f64) -> Result<f64> {
        let s = self.varsigma;
        let arg = 1.0 - 2.0 * z / (s * s);
        if arg <= 0.0 {
            return Err(Error::domain(format!(
                "cumulant derivative needs z < varsigma^2/2 = {}, got z = {z}",
                0.5 * s * s
            )));
        }
        Ok(1.0 / (s * arg.sqrt()))
    }

    /// Analytic continuation of the cumulant transform. The real part of
    /// 1 - 2z/varsigma^2 stays positive on every contour used here, so the
    /// principal square root is the right branch.
    fn cumulant_c(&self, z: Complex64) -> Complex64 {
        let s = self.varsigma;
        let arg = Complex64::new(1.0, 0.0) - 2.0 * z / (s * s);
        s * (Complex64::new(1.0, 0.0) - arg.sqrt())
    }

    /// -(1 - exp(-alpha (t - s))) / alpha, the bond-exposure kernel.
    fn neg_sigma(&self, s: f64, t: f64) -> f64 {
        ((-self.alpha * (t - s)).exp() - 1.0) / self.alpha
    }

    /// Level the short rate reverts to at time t, fixed by the initial fit.
    pub fn drift_level(&self, t: f64) -> f64 {
        let a = self.alpha;
        let x = self.neg_sigma(0.0, t);
        let psi = self.cumulant(x).expect("fit argument is nonpositive");
        let psi_d = self.cumulant_deriv(x).expect("fit argument is nonpositive");
        self.curve.forward(t) + self.curve.forward_slope(t) / a + psi
            - psi_d * (-a * t).exp() / a
    }

    /// Affine bond coefficients: B(t, T) = exp(m + n r_t).
    pub fn bond_coeffs(&self, t: f64, maturity: f64) -> Result<(f64, f64)> {
        if !(t <= maturity) {
            return Err(Error::invalid(format!(
                "bond coefficients need t <= maturity, got t={t}, maturity={maturity}"
            )));
        }
        let n = self.neg_sigma(t, maturity);
        if t == 0.0 {
            // The fit pins the time-zero coefficients directly.
            return Ok(((self.curve.discount(maturity)).ln() - n * self.curve.r0, n));
        }
        let fit = self.curve.forward(t) + self.cumulant(self.neg_sigma(0.0, t))?;
        let nodes = (64.0 * t.ceil()).max(64.0) as usize;
        let (xs, ws) = gauss_legendre(nodes);
        let half = 0.5 * t;
        let mut corr = 0.0;
        for (x, w) in xs.iter().zip(&ws) {
            let s = half * (1.0 + x);
            corr += w
                * (self.cumulant(self.neg_sigma(s, maturity))?
                    - self.cumulant(self.neg_sigma(s, t))?);
        }
        corr *= half;
        let m = (self.curve.discount(maturity) / self.curve.discount(t)).ln() - n * fit - corr;
        Ok((m, n))
    }

    /// Zero-coupon bond price at time t given the short rate r.
    pub fn bond(&self, t: f64, maturity: f64, r: f64) -> Result<f64> {
        let (m, n) = self.bond_coeffs(t, maturity)?;
        Ok((m + n * r).exp())
    }

    /// Moment generating function, under the (expiry + period)-forward
    /// measure, of Y = -log B(expiry, expiry + period).
    pub fn forward_mgf(&self, expiry: f64, period: f64, z: Complex64) -> Result<Complex64> {
        let grid = FourierGrid::default();
        let pieces = MgfPieces::prepare(self, expiry, period, &grid, z.re)?;
        Ok(pieces.eval(self, z))
    }

    /// Time-zero caplet price per unit notional, by damped Fourier
    /// inversion of the forward bond-price distribution. Conventions match
    /// the Gaussian model's closed form.
    pub fn caplet_fourier(&self, expiry: f64, period: f64, rate: f64) -> Result<f64> {
        self.caplet_fourier_with(expiry, period, rate, &FourierGrid::default())
    }

    pub fn caplet_fourier_with(
        &self,
        expiry: f64,
        period: f64,
        rate: f64,
        grid: &FourierGrid,
    ) -> Result<f64> {
        if !(expiry >= 0.0) || !(period > 0.0) {
            return Err(Error::invalid(format!(
                "caplet needs expiry >= 0 and period > 0, got {expiry}, {period}"
            )));
        }
        if !(grid.damping > 1.0) {
            return Err(Error::invalid("damping must exceed 1"));
        }
        let accrual = 1.0 + period * rate;
        if expiry == 0.0 {
            let b_near = self.curve.discount(0.0);
            let b_far = self.curve.discount(period);
            return Ok((b_near - accrual * b_far).max(0.0));
        }
        let r = grid.damping;
        let pieces = MgfPieces::prepare(self, expiry, period, grid, r)?;
        let b_far = self.curve.discount(expiry + period);
        let log_accrual = accrual.ln();

        if grid.v_nodes < 8 {
            return Err(Error::invalid("v_nodes must be at least 8"));
        }
        let (vs, ws) = gauss_legendre(grid.v_nodes / 4);
        let cuts = [
            0.0,
            grid.v_max / 100.0,
            grid.v_max / 20.0,
            grid.v_max / 4.0,
            grid.v_max,
        ];
        let mut acc = 0.0;
        for panel in cuts.windows(2) {
            let half = 0.5 * (panel[1] - panel[0]);
            let mid = 0.5 * (panel[1] + panel[0]);
            for (x, w) in vs.iter().zip(&ws) {
                let v = mid + half * x;
                let z = Complex64::new(r, -v);
                let mgf = pieces.eval(self, z);
                // accrual^(1 - z) / (z (z - 1)) with z = R - iv.
                let kernel = ((1.0 - z) * log_accrual).exp() / (z * (z - 1.0));
                acc += w * half * (mgf * kernel).re;
            }
        }
        Ok(b_far / std::f64::consts::PI * acc)
    }
}

/// Precomputed ingredients of the forward MGF for one (expiry, period) pair.
struct MgfPieces {
    weights: Vec<f64>,
    // Sigma_s(T) and Sigma_s(T + period) at the time nodes.
    sig_near: Vec<f64>,
    sig_far: Vec<f64>,
    c0: f64,
    c1: f64,
}

impl MgfPieces {
    fn prepare(
        model: &LhwParams,
        expiry: f64,
        period: f64,
        grid: &FourierGrid,
        max_re: f64,
    ) -> Result<MgfPieces> {
        let nodes = ((grid.s_nodes_per_year as f64) * expiry.ceil()).max(8.0) as usize;
        let (xs, ws) = gauss_legendre(nodes);
        let half = 0.5 * expiry;
        let mut weights = Vec::with_capacity(nodes);
        let mut sig_near = Vec::with_capacity(nodes);
        let mut sig_far = Vec::with_capacity(nodes);
        let mut c0 = 0.0;
        let mut c1_int = 0.0;
        let bound = 0.5 * model.varsigma * model.varsigma;
        for (x, w) in xs.iter().zip(&ws) {
            let s = half * (1.0 + x);
            let near = -model.neg_sigma(s, expiry);
            let far = -model.neg_sigma(s, expiry + period);
            // Largest real part the transform argument takes on the
            // damping line: (Re z - 1) sig_far - Re z * sig_near.
            let worst = (max_re - 1.0) * far - max_re * near;
            if worst >= bound {
                return Err(Error::domain(format!(
                    "caplet transform leaves the cumulant domain (needs {worst} < {bound}); \
                     lower the damping or check varsigma"
                )));
            }
            let psi_far = model.cumulant(-far)?;
            let psi_near = model.cumulant(-near)?;
            c0 -= w * half * psi_far;
            c1_int += w * half * (psi_far - psi_near);
            weights.push(w * half);
            sig_near.push(near);
            sig_far.push(far);
        }
        let c1 = (model.curve.discount(expiry) / model.curve.discount(expiry + period)).ln()
            + c1_int;
        Ok(MgfPieces { weights, sig_near, sig_far, c0, c1 })
    }

    fn eval(&self, model: &LhwParams, z: Complex64) -> Complex64 {
        let mut int = Complex64::new(0.0, 0.0);
        for ((w, near), far) in self.weights.iter().zip(&self.sig_near).zip(&self.sig_far) {
            let arg = (z - 1.0) * *far - z * *near;
            int += *w * model.cumulant_c(arg);
        }
        (self.c0 + z * self.c1 + int).exp()
    }
}
