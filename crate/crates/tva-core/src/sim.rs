//! Path simulation on a uniform time grid with per-path random streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, InverseGaussian, StandardNormal};
use rayon::prelude::*;

use crate::curve::InitialCurve;
use crate::error::{Error, Result};
use crate::lhw::LhwParams;
use crate::vasicek::VasicekParams;

/// Uniform grid 0 = t_0 < ... < t_n = horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub horizon: f64,
    pub steps: usize,
}

impl GridSpec {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::invalid(format!("horizon={horizon} must be positive")));
        }
        if steps == 0 {
            return Err(Error::invalid("steps must be positive"));
        }
        Ok(GridSpec { horizon, steps })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// t_i, computed so that integer multiples of round horizons land
    /// exactly on representable values.
    pub fn time(&self, step: usize) -> f64 {
        self.horizon * step as f64 / self.steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.time(i)).collect()
    }

    /// Grid index of a date, if the date lies on the grid.
    pub fn step_of(&self, date: f64) -> Result<usize> {
        let raw = date / self.dt();
        let idx = raw.round();
        if (raw - idx).abs() > 1e-9 || idx < 0.0 || idx > self.steps as f64 {
            return Err(Error::invalid(format!("date {date} is not on the simulation grid")));
        }
        Ok(idx as usize)
    }
}

/// The two co-calibrated short-rate models.
#[derive(Debug, Clone, Copy)]
pub enum ShortRateModel {
    Vasicek(VasicekParams),
    Lhw(LhwParams),
}

impl ShortRateModel {
    pub fn label(&self) -> &'static str {
        match self {
            ShortRateModel::Vasicek(_) => "vasicek",
            ShortRateModel::Lhw(_) => "lhw",
        }
    }

    pub fn curve(&self) -> InitialCurve {
        match self {
            ShortRateModel::Vasicek(p) => p.initial_curve(),
            ShortRateModel::Lhw(p) => p.curve,
        }
    }

    pub fn r0(&self) -> f64 {
        self.curve().r0
    }

    pub fn bond_coeffs(&self, t: f64, maturity: f64) -> Result<(f64, f64)> {
        match self {
            ShortRateModel::Vasicek(p) => p.bond_coeffs(t, maturity),
            ShortRateModel::Lhw(p) => p.bond_coeffs(t, maturity),
        }
    }

    pub fn bond(&self, t: f64, maturity: f64, r: f64) -> Result<f64> {
        match self {
            ShortRateModel::Vasicek(p) => p.bond(t, maturity, r),
            ShortRateModel::Lhw(p) => p.bond(t, maturity, r),
        }
    }

    /// Euler simulation of `paths` short-rate paths. Each path draws from
    /// its own counter-based stream, so results do not depend on thread
    /// scheduling.
    pub fn simulate(&self, grid: GridSpec, paths: usize, seed: u64) -> Result<PathSet> {
        if paths == 0 {
            return Err(Error::invalid("need at least one path"));
        }
        let n = grid.steps;
        let h = grid.dt();
        let cols = n + 1;
        let mut rates = vec![0.0; paths * cols];
        let mut cum = vec![0.0; paths * cols];

        match self {
            ShortRateModel::Vasicek(p) => {
                p.validate()?;
                let (a, level, sigma, r0) = (p.a, p.level, p.sigma, p.r0);
                let sqh = h.sqrt();
                rates
                    .par_chunks_mut(cols)
                    .zip(cum.par_chunks_mut(cols))
                    .enumerate()
                    .for_each(|(j, (row, crow))| {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        rng.set_stream(j as u64);
                        row[0] = r0;
                        for i in 0..n {
                            let z: f64 = rng.sample(StandardNormal);
                            row[i + 1] = row[i] + a * (level - row[i]) * h + sigma * sqh * z;
                            crow[i + 1] = crow[i] + row[i] * h;
                        }
                    });
            }
            ShortRateModel::Lhw(p) => {
                p.validate()?;
                let alpha = p.alpha;
                let r0 = p.curve.r0;
                let jump = InverseGaussian::new(h / p.varsigma, h * h)
                    .map_err(|e| Error::invalid(format!("bad jump increment law: {e}")))?;
                let levels: Vec<f64> = (0..n).map(|i| p.drift_level(grid.time(i))).collect();
                rates
                    .par_chunks_mut(cols)
                    .zip(cum.par_chunks_mut(cols))
                    .enumerate()
                    .for_each(|(j, (row, crow))| {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        rng.set_stream(j as u64);
                        row[0] = r0;
                        for i in 0..n {
                            let dz = jump.sample(&mut rng);
                            row[i + 1] = row[i] + alpha * (levels[i] - row[i]) * h + dz;
                            crow[i + 1] = crow[i] + row[i] * h;
                        }
                    });
            }
        }

        Ok(PathSet { grid, paths, rates, cum })
    }
}

/// One draw of the inverse-Gaussian increment of the jump driver over `dt`.
pub fn sample_ig_increment<R: Rng + ?Sized>(dt: f64, varsigma: f64, rng: &mut R) -> f64 {
    let dist = InverseGaussian::new(dt / varsigma, dt * dt)
        .expect("increment law needs positive dt and varsigma");
    dist.sample(rng)
}

/// Simulated short-rate paths plus running integrals of the rate,
/// from which every discount variant used downstream is recovered.
#[derive(Debug, Clone)]
pub struct PathSet {
    grid: GridSpec,
    paths: usize,
    // Row-major per path, steps+1 entries per path.
    rates: Vec<f64>,
    // Left-endpoint Riemann sums of r dt up to each grid time.
    cum: Vec<f64>,
}

impl PathSet {
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn steps(&self) -> usize {
        self.grid.steps
    }

    pub fn rate(&self, path: usize, step: usize) -> f64 {
        self.rates[path * (self.grid.steps + 1) + step]
    }

    /// int_0^{t_step} r ds along the path (left-endpoint rule).
    pub fn integrated_rate(&self, path: usize, step: usize) -> f64 {
        self.cum[path * (self.grid.steps + 1) + step]
    }

    /// exp(-int_0^{t_step} r ds).
    pub fn discount(&self, path: usize, step: usize) -> f64 {
        (-self.integrated_rate(path, step)).exp()
    }

    /// exp(-int_0^{t_step} (r + spread) ds) for a constant spread.
    pub fn spread_discount(&self, path: usize, step: usize, spread: f64) -> f64 {
        (-self.integrated_rate(path, step) - spread * self.grid.time(step)).exp()
    }

    /// All short rates observed at one grid time.
    pub fn column(&self, step: usize) -> Vec<f64> {
        (0..self.paths).map(|j| self.rate(j, step)).collect()
    }
}
