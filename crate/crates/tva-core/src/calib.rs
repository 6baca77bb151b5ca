//! Co-calibration of the jump model to cap prices produced by the Gaussian
//! model on the shared curve.

use crate::curve::InitialCurve;
use crate::error::{Error, Result};
use crate::lhw::LhwParams;
use crate::pricing::{cap_price, CapSpec};
use crate::sim::ShortRateModel;
use crate::vasicek::VasicekParams;

/// Search bracket for the jump-size parameter.
#[derive(Debug, Clone, Copy)]
pub struct VarsigmaBracket {
    pub lo: f64,
    pub hi: f64,
}

impl Default for VarsigmaBracket {
    fn default() -> Self {
        VarsigmaBracket { lo: 1.0, hi: 100.0 }
    }
}

/// Solve cap_lhw(varsigma) = target_cap for varsigma.
///
/// The cap price is strictly decreasing in varsigma (larger varsigma means
/// smaller jumps), so a bracketed root search applies. Iterates until the
/// bracket is below 1e-6 wide, which puts the cap residual well inside 1e-4.
pub fn calibrate_varsigma(
    target_cap: f64,
    alpha: f64,
    curve: InitialCurve,
    cap: &CapSpec,
    bracket: VarsigmaBracket,
) -> Result<f64> {
    if !(bracket.lo > 0.0 && bracket.hi > bracket.lo) {
        return Err(Error::invalid(format!(
            "bad varsigma bracket [{}, {}]",
            bracket.lo, bracket.hi
        )));
    }
    let price = |vs: f64| -> Result<f64> {
        let p = LhwParams::new(alpha, vs, curve)?;
        cap_price(&ShortRateModel::Lhw(p), cap)
    };
    let f_lo = price(bracket.lo)? - target_cap;
    let f_hi = price(bracket.hi)? - target_cap;
    if f_lo == 0.0 {
        return Ok(bracket.lo);
    }
    if f_hi == 0.0 {
        return Ok(bracket.hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::numerical(format!(
            "target cap {target_cap:.6} is not bracketed on [{}, {}]: \
             residuals {f_lo:.6} and {f_hi:.6}",
            bracket.lo, bracket.hi
        )));
    }

    // Brent's method: inverse quadratic / secant steps guarded by bisection.
    let (mut a, mut b) = (bracket.lo, bracket.hi);
    let (mut fa, mut fb) = (f_lo, f_hi);
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut bisected = true;
    let tol = 1e-6;
    for _ in 0..200 {
        if fb == 0.0 || (b - a).abs() <= tol {
            return Ok(b);
        }
        let mut s = if fa != fc && fb != fc {
            // Inverse quadratic interpolation.
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let mid = 0.5 * (a + b);
        let between = (s - b) * (s - mid) < 0.0;
        let shrinking = if bisected {
            (s - b).abs() < 0.5 * (b - c).abs()
        } else {
            (s - b).abs() < 0.5 * (c - d).abs()
        };
        if !between || !shrinking {
            s = mid;
            bisected = true;
        } else {
            bisected = false;
        }
        let fs = price(s)? - target_cap;
        d = c;
        c = b;
        fc = fb;
        if fa.signum() != fs.signum() {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    Err(Error::numerical("varsigma search did not converge in 200 iterations"))
}

/// Result of fitting both models to the shared curve and cap level.
#[derive(Debug, Clone, Copy)]
pub struct CoCalibration {
    pub cap_vasicek: f64,
    pub varsigma: f64,
    pub cap_lhw: f64,
}

/// Price the cap in the Gaussian model and fit the jump model to it.
pub fn co_calibrate(
    vasicek: &VasicekParams,
    alpha: f64,
    cap: &CapSpec,
) -> Result<CoCalibration> {
    let cap_vasicek = cap_price(&ShortRateModel::Vasicek(*vasicek), cap)?;
    let curve = vasicek.initial_curve();
    let varsigma =
        calibrate_varsigma(cap_vasicek, alpha, curve, cap, VarsigmaBracket::default())?;
    let cap_lhw = cap_price(&ShortRateModel::Lhw(LhwParams::new(alpha, varsigma, curve)?), cap)?;
    Ok(CoCalibration { cap_vasicek, varsigma, cap_lhw })
}
