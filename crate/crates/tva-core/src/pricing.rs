//! Clean (counterparty-free) pricing: forward rate agreements, swaps,
//! caps, and their collateral-adjusted variants.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, InverseGaussian};
use rayon::prelude::*;

use crate::curve::InitialCurve;
use crate::error::{Error, Result};
use crate::lhw::LhwParams;
use crate::math::mean_and_stderr;
use crate::sim::{PathSet, ShortRateModel};
use crate::vasicek::VasicekParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwapDirection {
    /// Receives the floating leg, pays the fixed leg.
    Receiver,
    /// Pays the floating leg, receives the fixed leg.
    Payer,
}

impl SwapDirection {
    pub fn sign(&self) -> f64 {
        match self {
            SwapDirection::Receiver => 1.0,
            SwapDirection::Payer => -1.0,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SwapDirection::Receiver => "receiver",
            SwapDirection::Payer => "payer",
        }
    }
}

/// A swap exchanging the in-arrears simple rate against a fixed rate on a
/// shared payment schedule. The floating rate over (T_{l-1}, T_l] fixes at
/// T_{l-1} and both legs pay at T_l.
#[derive(Debug, Clone, PartialEq)]
pub struct SwapSpec {
    pub notional: f64,
    pub fixed_rate: f64,
    pub inception: f64,
    /// Strictly increasing payment dates after inception.
    pub payment_dates: Vec<f64>,
    pub direction: SwapDirection,
}

impl SwapSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.notional > 0.0) {
            return Err(Error::invalid("notional must be positive"));
        }
        if !self.fixed_rate.is_finite() {
            return Err(Error::invalid("fixed rate must be finite"));
        }
        if self.payment_dates.is_empty() {
            return Err(Error::invalid("swap needs at least one payment date"));
        }
        let mut prev = self.inception;
        for (l, t) in self.payment_dates.iter().enumerate() {
            if !(*t > prev) {
                return Err(Error::invalid(format!(
                    "payment date {l} ({t}) must exceed the previous date ({prev})"
                )));
            }
            prev = *t;
        }
        Ok(())
    }

    pub fn maturity(&self) -> f64 {
        *self.payment_dates.last().expect("validated nonempty")
    }

    /// Start of the accrual period ending at payment_dates[l].
    pub fn period_start(&self, l: usize) -> f64 {
        if l == 0 {
            self.inception
        } else {
            self.payment_dates[l - 1]
        }
    }

    /// Accrual fraction of the period ending at payment_dates[l].
    pub fn accrual(&self, l: usize) -> f64 {
        self.payment_dates[l] - self.period_start(l)
    }

    /// Dates at which the floating rate fixes: inception and every payment
    /// date except the last.
    pub fn reset_dates(&self) -> Vec<f64> {
        let mut dates = vec![self.inception];
        dates.extend_from_slice(&self.payment_dates[..self.payment_dates.len() - 1]);
        dates
    }

    /// Index l of the accrual period containing t, i.e. the smallest l with
    /// payment_dates[l] > t. None once the swap has matured.
    pub fn current_period(&self, t: f64) -> Option<usize> {
        self.payment_dates.iter().position(|d| *d > t)
    }
}

/// Level annuity sum(delta_l B(0, T_l)) of a payment schedule.
pub fn annuity(curve: &InitialCurve, inception: f64, payment_dates: &[f64]) -> f64 {
    let mut prev = inception;
    let mut acc = 0.0;
    for t in payment_dates {
        acc += (t - prev) * curve.discount(*t);
        prev = *t;
    }
    acc
}

/// Fixed rate that makes the swap worthless at time zero.
pub fn par_swap_rate(curve: &InitialCurve, inception: f64, payment_dates: &[f64]) -> Result<f64> {
    if payment_dates.is_empty() {
        return Err(Error::invalid("par rate needs at least one payment date"));
    }
    let a = annuity(curve, inception, payment_dates);
    if a <= 0.0 {
        return Err(Error::numerical("annuity must be positive"));
    }
    let maturity = *payment_dates.last().unwrap();
    Ok((curve.discount(inception) - curve.discount(maturity)) / a)
}

/// Time-zero value of a forward rate agreement paying
/// notional * delta * (L - rate) at expiry + delta.
pub fn fra_price(curve: &InitialCurve, expiry: f64, delta: f64, rate: f64, notional: f64) -> f64 {
    notional * (curve.discount(expiry) - (1.0 + delta * rate) * curve.discount(expiry + delta))
}

/// Mark-to-model price of the swap at time t given the short rate r.
///
/// Before the first accrual period starts, the price needs no fixing; in
/// life, `last_fixing` must carry 1 / B(T_{l-1}, T_l) observed at the last
/// reset. Rejects t at or past maturity, where the swap is worthless
/// ex-flows.
pub fn swap_price(
    t: f64,
    r: f64,
    last_fixing: Option<f64>,
    swap: &SwapSpec,
    model: &ShortRateModel,
) -> Result<f64> {
    swap.validate()?;
    if !(t < swap.maturity()) {
        return Err(Error::invalid(format!(
            "swap price needs t < maturity {}, got t={t}",
            swap.maturity()
        )));
    }
    let n = swap.payment_dates.len();
    let k = swap.fixed_rate;
    let receiver = if t <= swap.inception {
        let mut fixed = 0.0;
        for l in 0..n {
            fixed += swap.accrual(l) * model.bond(t, swap.payment_dates[l], r)?;
        }
        model.bond(t, swap.inception, r)? - model.bond(t, swap.maturity(), r)? - k * fixed
    } else {
        let cur = swap.current_period(t).expect("t < maturity");
        let fixing = last_fixing.ok_or_else(|| {
            Error::invalid("in-life swap price needs the current period's fixing")
        })?;
        let mut value =
            (fixing - k * swap.accrual(cur)) * model.bond(t, swap.payment_dates[cur], r)?
                - model.bond(t, swap.maturity(), r)?;
        for l in (cur + 1)..n {
            value -= k * swap.accrual(l) * model.bond(t, swap.payment_dates[l], r)?;
        }
        value
    };
    Ok(swap.direction.sign() * swap.notional * receiver)
}

/// Price of the swap whose flows are remunerated at the short rate plus a
/// constant spread `b`, which shifts each remaining flow by
/// exp(-b (T_l - t)). At b = 0 this is `swap_price`.
pub fn collateralized_swap_price(
    t: f64,
    r: f64,
    last_fixing: Option<f64>,
    swap: &SwapSpec,
    model: &ShortRateModel,
    b: f64,
) -> Result<f64> {
    swap.validate()?;
    if !(t < swap.maturity()) {
        return Err(Error::invalid(format!(
            "swap price needs t < maturity {}, got t={t}",
            swap.maturity()
        )));
    }
    let n = swap.payment_dates.len();
    let k = swap.fixed_rate;
    // Value of the flows of period l, floating minus fixed, seen from t.
    let future_period = |l: usize| -> Result<f64> {
        let float = model.bond(t, swap.period_start(l), r)?
            - model.bond(t, swap.payment_dates[l], r)?;
        let fixed = k * swap.accrual(l) * model.bond(t, swap.payment_dates[l], r)?;
        Ok(float - fixed)
    };
    let receiver = if t <= swap.inception {
        let mut acc = 0.0;
        for l in 0..n {
            acc += (-b * (swap.payment_dates[l] - t)).exp() * future_period(l)?;
        }
        acc
    } else {
        let cur = swap.current_period(t).expect("t < maturity");
        let fixing = last_fixing.ok_or_else(|| {
            Error::invalid("in-life swap price needs the current period's fixing")
        })?;
        let pay = swap.payment_dates[cur];
        let mut acc = (-b * (pay - t)).exp()
            * (fixing - 1.0 - k * swap.accrual(cur))
            * model.bond(t, pay, r)?;
        for l in (cur + 1)..n {
            acc += (-b * (swap.payment_dates[l] - t)).exp() * future_period(l)?;
        }
        acc
    };
    Ok(swap.direction.sign() * swap.notional * receiver)
}

/// A cap as a strip of caplets: each reset date starts a period of length
/// `period`, all struck at `rate`, per unit notional.
#[derive(Debug, Clone, PartialEq)]
pub struct CapSpec {
    pub reset_dates: Vec<f64>,
    pub period: f64,
    pub rate: f64,
}

impl CapSpec {
    pub fn validate(&self) -> Result<()> {
        if self.reset_dates.is_empty() {
            return Err(Error::invalid("cap needs at least one reset date"));
        }
        if !(self.period > 0.0) {
            return Err(Error::invalid("cap period must be positive"));
        }
        Ok(())
    }
}

pub fn caplet_vasicek(params: &VasicekParams, expiry: f64, period: f64, rate: f64) -> Result<f64> {
    params.caplet(expiry, period, rate)
}

pub fn caplet_lhw_fourier(params: &LhwParams, expiry: f64, period: f64, rate: f64) -> Result<f64> {
    params.caplet_fourier(expiry, period, rate)
}

/// Cap price under either model, summing its caplets.
pub fn cap_price(model: &ShortRateModel, cap: &CapSpec) -> Result<f64> {
    cap.validate()?;
    let mut total = 0.0;
    for t in &cap.reset_dates {
        total += match model {
            ShortRateModel::Vasicek(p) => p.caplet(*t, cap.period, cap.rate)?,
            ShortRateModel::Lhw(p) => p.caplet_fourier(*t, cap.period, cap.rate)?,
        };
    }
    Ok(total)
}

/// Monte Carlo caplet prices under the jump model, one estimate per expiry,
/// with standard errors. A single set of Euler paths with step `dt` serves
/// every expiry; per-path streams keep the result independent of threading.
pub fn caplet_lhw_mc_batch(
    params: &LhwParams,
    expiries: &[f64],
    period: f64,
    rate: f64,
    paths: usize,
    dt: f64,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    params.validate()?;
    if !(period > 0.0) || !(dt > 0.0) || paths < 2 {
        return Err(Error::invalid("caplet MC needs period > 0, dt > 0 and paths >= 2"));
    }
    let accrual = 1.0 + period * rate;
    let mut out = Vec::with_capacity(expiries.len());
    let horizon = expiries.iter().cloned().fold(0.0f64, f64::max);

    // Deterministic payoffs need no simulation.
    let intrinsic = |expiry: f64| -> f64 {
        (params.curve.discount(expiry) - accrual * params.curve.discount(expiry + period)).max(0.0)
    };
    if horizon == 0.0 {
        for e in expiries {
            if *e < 0.0 {
                return Err(Error::invalid(format!("caplet expiry {e} must be nonnegative")));
            }
            out.push((intrinsic(*e), 0.0));
        }
        return Ok(out);
    }

    let steps = (horizon / dt).ceil() as usize;
    let h = horizon / steps as f64;
    // Map each expiry to its grid index; expiries must land on the grid.
    let mut checkpoints = Vec::with_capacity(expiries.len());
    for e in expiries {
        if *e < 0.0 {
            return Err(Error::invalid(format!("caplet expiry {e} must be nonnegative")));
        }
        let raw = e / h;
        let idx = raw.round();
        if (raw - idx).abs() > 1e-6 {
            return Err(Error::invalid(format!("caplet expiry {e} is not a multiple of dt={h}")));
        }
        checkpoints.push(idx as usize);
    }

    let levels: Vec<f64> = (0..steps).map(|i| params.drift_level(i as f64 * h)).collect();
    let bonds: Vec<Option<(f64, f64)>> = {
        let mut v = vec![None; steps + 1];
        for (e, idx) in expiries.iter().zip(&checkpoints) {
            if *idx > 0 {
                v[*idx] = Some(params.bond_coeffs(*e, *e + period)?);
            }
        }
        v
    };
    let jump = InverseGaussian::new(h / params.varsigma, h * h)
        .map_err(|e| Error::invalid(format!("bad jump increment law: {e}")))?;
    let alpha = params.alpha;
    let r0 = params.curve.r0;

    // payoffs[path][expiry]
    let discounted: Vec<Vec<f64>> = (0..paths)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let mut r = r0;
            let mut cum = 0.0f64;
            let mut vals = vec![0.0; expiries.len()];
            for i in 0..=steps {
                for (slot, idx) in checkpoints.iter().enumerate() {
                    if *idx == i && i > 0 {
                        let (m, n) = bonds[i].expect("prepared above");
                        let payoff = (1.0 - accrual * (m + n * r).exp()).max(0.0);
                        vals[slot] = (-cum).exp() * payoff;
                    }
                }
                if i < steps {
                    let dz = jump.sample(&mut rng);
                    cum += r * h;
                    r += alpha * (levels[i] - r) * h + dz;
                }
            }
            vals
        })
        .collect();

    for (slot, idx) in checkpoints.iter().enumerate() {
        if *idx == 0 {
            out.push((intrinsic(expiries[slot]), 0.0));
        } else {
            let samples: Vec<f64> = discounted.iter().map(|v| v[slot]).collect();
            let (mean, se) = mean_and_stderr(&samples);
            out.push((mean, se));
        }
    }
    Ok(out)
}

/// Single-expiry convenience wrapper around `caplet_lhw_mc_batch`.
pub fn caplet_lhw_mc(
    params: &LhwParams,
    expiry: f64,
    period: f64,
    rate: f64,
    paths: usize,
    dt: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    Ok(caplet_lhw_mc_batch(params, &[expiry], period, rate, paths, dt, seed)?[0])
}

/// Floating-rate fixings observed along simulated paths: at each reset date
/// the factor 1 / B(T_{l-1}, T_l) is recorded per path.
#[derive(Debug, Clone)]
pub struct FixingSheet {
    reset_steps: Vec<usize>,
    // Row-major per path.
    values: Vec<f64>,
}

impl FixingSheet {
    pub fn resets(&self) -> usize {
        self.reset_steps.len()
    }

    pub fn reset_step(&self, reset: usize) -> usize {
        self.reset_steps[reset]
    }

    pub fn fixing(&self, path: usize, reset: usize) -> f64 {
        self.values[path * self.reset_steps.len() + reset]
    }
}

/// Record the floating fixings of `swap` along every path.
pub fn record_fixings(
    paths: &PathSet,
    swap: &SwapSpec,
    model: &ShortRateModel,
) -> Result<FixingSheet> {
    swap.validate()?;
    let grid = paths.grid();
    let resets = swap.reset_dates();
    let mut reset_steps = Vec::with_capacity(resets.len());
    let mut coeffs = Vec::with_capacity(resets.len());
    for (l, t) in resets.iter().enumerate() {
        reset_steps.push(grid.step_of(*t)?);
        coeffs.push(model.bond_coeffs(*t, swap.payment_dates[l])?);
    }
    let m = paths.paths();
    let mut values = vec![0.0; m * resets.len()];
    values
        .par_chunks_mut(resets.len())
        .enumerate()
        .for_each(|(j, row)| {
            for (slot, (step, (mc, nc))) in reset_steps.iter().zip(&coeffs).enumerate() {
                row[slot] = (-(mc + nc * paths.rate(j, *step))).exp();
            }
        });
    Ok(FixingSheet { reset_steps, values })
}
