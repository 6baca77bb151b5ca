//! Experiment orchestration: configuration, the full valuation run over
//! both models, directions and credit-support annexes, and CSV reporting.

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::calib::co_calibrate;
use crate::curve::InitialCurve;
use crate::error::{Error, Result};
use crate::lhw::LhwParams;
use crate::pricing::{
    annuity, cap_price, par_swap_rate, record_fixings, CapSpec, SwapDirection, SwapSpec,
};
use crate::sim::{GridSpec, ShortRateModel};
use crate::tva::{
    clean_price_surface, decompose_tva, linear_tva_mc, solve_tva, BsdeInputs, CloseOut,
    Collateral, CsaSpec, ExposureProfiles, LinearEstimate, NeighborhoodGrid,
};
use crate::vasicek::VasicekParams;

/// Jump-scale parameter of the default configuration, backed out once from
/// the Gaussian cap quote so that routine runs do not depend on the
/// calibration step.
pub const DEFAULT_VARSIGMA: f64 = 17.570728;

/// Full description of a valuation run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub paths: usize,
    pub steps: usize,
    /// Swap maturity in years; payments fall yearly.
    pub horizon: f64,
    /// Cross-sectional neighbors used by the regression.
    pub neighbors: usize,
    pub notional: f64,
    /// None prices the swap at par off the initial curve.
    pub fixed_rate: Option<f64>,
    // Gaussian model and shared initial curve.
    pub a: f64,
    pub level: f64,
    pub sigma: f64,
    pub r0: f64,
    // Jump model: mean reversion and jump scale; None co-calibrates the
    // scale to the Gaussian cap price.
    pub alpha: f64,
    pub varsigma: Option<f64>,
    pub csas: Vec<CsaSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            paths: 10_000,
            steps: 200,
            horizon: 10.0,
            neighbors: 5,
            notional: 310.136066,
            fixed_rate: None,
            a: 0.25,
            level: 0.05,
            sigma: 0.004,
            r0: 0.02,
            alpha: 0.25,
            varsigma: Some(DEFAULT_VARSIGMA),
            csas: default_csa_set(),
        }
    }
}

/// The five credit-support conventions of the standard run: progressively
/// tighter close-out and collateral terms on a common set of spreads.
pub fn default_csa_set() -> Vec<CsaSpec> {
    let base = CsaSpec {
        label: "1".into(),
        gamma: 0.10,
        p: 0.5,
        p_bar: 0.7,
        rho: 0.4,
        rho_bar: 0.4,
        funder_recovery: 0.4,
        b_plus: 0.015,
        b_minus: 0.015,
        lambda_plus: 0.015,
        lambda_bar: 0.045,
        close_out: CloseOut::Clean,
        collateral: Collateral::None,
    };
    vec![
        base.clone(),
        CsaSpec { label: "2".into(), funder_recovery: 1.0, ..base.clone() },
        CsaSpec { label: "3".into(), funder_recovery: 1.0, rho: 1.0, ..base.clone() },
        CsaSpec {
            label: "4".into(),
            funder_recovery: 1.0,
            rho: 1.0,
            close_out: CloseOut::PreDefault,
            ..base.clone()
        },
        CsaSpec {
            label: "5".into(),
            funder_recovery: 1.0,
            collateral: Collateral::ContinuousClean,
            ..base
        },
    ]
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.paths < 2 {
            return Err(Error::invalid("need at least two paths"));
        }
        if self.steps == 0 {
            return Err(Error::invalid("need at least one time step"));
        }
        if !(self.horizon > 0.0) || (self.horizon - self.horizon.round()).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "horizon {} must be a whole number of years",
                self.horizon
            )));
        }
        if self.neighbors == 0 || self.neighbors > self.paths {
            return Err(Error::invalid(format!(
                "neighbors {} must lie in 1..={}",
                self.neighbors, self.paths
            )));
        }
        if !(self.notional > 0.0) {
            return Err(Error::invalid("notional must be positive"));
        }
        if self.csas.is_empty() {
            return Err(Error::invalid("at least one csa is required"));
        }
        for csa in &self.csas {
            csa.validate()?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<ExperimentConfig> {
        let text = fs::read_to_string(path)?;
        parse_config(&text)
    }

    fn payment_dates(&self) -> Vec<f64> {
        let years = self.horizon.round() as usize;
        (1..=years).map(|k| k as f64).collect()
    }
}

// ── configuration grammar ───────────────────────────────────────────────

fn config_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config { line, message: message.into() }
}

fn parse_f64(line: usize, key: &str, raw: &str) -> Result<f64> {
    raw.parse::<f64>()
        .map_err(|_| config_err(line, format!("{key}: expected a number, got {raw:?}")))
}

/// Parse the key = value experiment grammar. Lines starting with `#` and
/// blank lines are skipped. Scalar keys may appear once. Each `csa = label
/// k=v ...` line appends one convention; the first such line replaces the
/// default set.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::default();
    let mut seen: Vec<String> = Vec::new();
    let mut saw_csa = false;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(config_err(line_no, format!("expected key = value, got {line:?}")));
        };
        let key = key.trim();
        let value = value.trim();
        if value.is_empty() {
            return Err(config_err(line_no, format!("{key}: missing value")));
        }
        if key != "csa" {
            if seen.iter().any(|k| k == key) {
                return Err(config_err(line_no, format!("{key}: duplicate key")));
            }
            seen.push(key.to_string());
        }
        match key {
            "seed" => {
                config.seed = value
                    .parse()
                    .map_err(|_| config_err(line_no, format!("seed: expected an integer, got {value:?}")))?;
            }
            "paths" => {
                config.paths = value
                    .parse()
                    .map_err(|_| config_err(line_no, format!("paths: expected an integer, got {value:?}")))?;
            }
            "steps" => {
                config.steps = value
                    .parse()
                    .map_err(|_| config_err(line_no, format!("steps: expected an integer, got {value:?}")))?;
            }
            "neighbors" => {
                config.neighbors = value
                    .parse()
                    .map_err(|_| config_err(line_no, format!("neighbors: expected an integer, got {value:?}")))?;
            }
            "horizon" => config.horizon = parse_f64(line_no, key, value)?,
            "notional" => config.notional = parse_f64(line_no, key, value)?,
            "fixed_rate" => {
                config.fixed_rate = if value == "par" {
                    None
                } else {
                    Some(parse_f64(line_no, key, value)?)
                };
            }
            "a" => config.a = parse_f64(line_no, key, value)?,
            "level" => config.level = parse_f64(line_no, key, value)?,
            "sigma" => config.sigma = parse_f64(line_no, key, value)?,
            "r0" => config.r0 = parse_f64(line_no, key, value)?,
            "alpha" => config.alpha = parse_f64(line_no, key, value)?,
            "varsigma" => {
                config.varsigma = if value == "calibrate" {
                    None
                } else {
                    Some(parse_f64(line_no, key, value)?)
                };
            }
            "csa" => {
                if !saw_csa {
                    config.csas.clear();
                    saw_csa = true;
                }
                config.csas.push(parse_csa(line_no, value)?);
            }
            _ => return Err(config_err(line_no, format!("unknown key {key:?}"))),
        }
    }
    Ok(config)
}

fn parse_csa(line: usize, spec: &str) -> Result<CsaSpec> {
    let mut fields = spec.split_whitespace();
    let Some(label) = fields.next() else {
        return Err(config_err(line, "csa: missing label"));
    };
    let mut csa = CsaSpec { label: label.to_string(), ..default_csa_set().swap_remove(0) };
    for field in fields {
        let Some((k, v)) = field.split_once('=') else {
            return Err(config_err(line, format!("csa: expected k=v, got {field:?}")));
        };
        match k {
            "gamma" => csa.gamma = parse_f64(line, k, v)?,
            "p" => csa.p = parse_f64(line, k, v)?,
            "p_bar" => csa.p_bar = parse_f64(line, k, v)?,
            "rho" => csa.rho = parse_f64(line, k, v)?,
            "rho_bar" => csa.rho_bar = parse_f64(line, k, v)?,
            "funder_recovery" => csa.funder_recovery = parse_f64(line, k, v)?,
            "b_plus" => csa.b_plus = parse_f64(line, k, v)?,
            "b_minus" => csa.b_minus = parse_f64(line, k, v)?,
            "lambda_plus" => csa.lambda_plus = parse_f64(line, k, v)?,
            "lambda_bar" => csa.lambda_bar = parse_f64(line, k, v)?,
            "close_out" => {
                csa.close_out = match v {
                    "clean" => CloseOut::Clean,
                    "pre_default" => CloseOut::PreDefault,
                    _ => {
                        return Err(config_err(
                            line,
                            format!("close_out: expected clean or pre_default, got {v:?}"),
                        ))
                    }
                };
            }
            "collateral" => {
                csa.collateral = match v {
                    "none" => Collateral::None,
                    "continuous_clean" => Collateral::ContinuousClean,
                    "continuous_pre_default" => Collateral::ContinuousPreDefault,
                    _ => {
                        return Err(config_err(
                            line,
                            format!(
                                "collateral: expected none, continuous_clean or \
                                 continuous_pre_default, got {v:?}"
                            ),
                        ))
                    }
                };
            }
            _ => return Err(config_err(line, format!("csa: unknown field {k:?}"))),
        }
    }
    Ok(csa)
}

// ── experiment run ──────────────────────────────────────────────────────

/// One (model, direction, convention) valuation.
pub struct CaseResult {
    pub model: &'static str,
    pub direction: SwapDirection,
    pub csa_label: String,
    pub tva: f64,
    pub cva: f64,
    pub dva: f64,
    pub lva: f64,
    pub rc: f64,
    /// Forward benchmark when the convention admits one.
    pub linear: Option<LinearEstimate>,
    pub profiles: ExposureProfiles,
}

impl CaseResult {
    pub fn lines_total(&self) -> f64 {
        self.cva + self.dva + self.lva + self.rc
    }
}

pub struct SampleRow {
    pub path: usize,
    pub step: usize,
    pub time: f64,
    pub rate: f64,
}

pub struct ExperimentReport {
    pub swap_rate: f64,
    pub fixed_rate: f64,
    pub annuity: f64,
    pub fixed_leg: f64,
    pub cap_vasicek: f64,
    pub varsigma: f64,
    pub cap_lhw: f64,
    pub cases: Vec<CaseResult>,
    /// First simulated paths of the jump model, for plotting.
    pub sample_model: &'static str,
    pub sample: Vec<SampleRow>,
}

const SAMPLE_PATHS: usize = 20;

fn run_model(
    model: &ShortRateModel,
    config: &ExperimentConfig,
    swap_template: &SwapSpec,
    want_sample: bool,
) -> Result<(Vec<CaseResult>, Vec<SampleRow>)> {
    let grid = GridSpec::new(config.horizon, config.steps)?;
    let paths = model.simulate(grid, config.paths, config.seed)?;
    let fixings = record_fixings(&paths, swap_template, model)?;
    let clean = clean_price_surface(&paths, &fixings, swap_template, model)?;
    let neighbors = NeighborhoodGrid::build(&paths, config.neighbors)?;

    let sample = if want_sample {
        let count = SAMPLE_PATHS.min(config.paths);
        (0..count)
            .flat_map(|j| {
                (0..=config.steps).map(move |i| (j, i))
            })
            .map(|(j, i)| SampleRow {
                path: j,
                step: i,
                time: grid.time(i),
                rate: paths.rate(j, i),
            })
            .collect()
    } else {
        Vec::new()
    };

    let case_specs: Vec<(SwapDirection, &CsaSpec)> = [SwapDirection::Receiver, SwapDirection::Payer]
        .iter()
        .flat_map(|&dir| config.csas.iter().map(move |csa| (dir, csa)))
        .collect();

    let cases: Vec<CaseResult> = case_specs
        .par_iter()
        .map(|&(direction, csa)| {
            let inputs = BsdeInputs {
                paths: &paths,
                clean: &clean,
                neighbors: &neighbors,
                sign: direction.sign(),
            };
            let surface = solve_tva(&inputs, csa)?;
            let dec = decompose_tva(&inputs, csa, &surface)?;
            let linear = match linear_tva_mc(&inputs, csa) {
                Ok(est) => Some(est),
                Err(Error::NotLinear(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(CaseResult {
                model: model.label(),
                direction,
                csa_label: csa.label.clone(),
                tva: dec.theta0,
                cva: dec.cva,
                dva: dec.dva,
                lva: dec.lva,
                rc: dec.rc,
                linear,
                profiles: dec.profiles,
            })
        })
        .collect::<Result<_>>()?;

    Ok((cases, sample))
}

/// Run the whole experiment: price and calibrate the instruments, then
/// value every (model, direction, convention) case.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let curve = InitialCurve::new(config.a, config.level, config.sigma, config.r0)?;
    let vasicek = VasicekParams::new(config.a, config.level, config.sigma, config.r0)?;
    let payment_dates = config.payment_dates();

    let swap_rate = par_swap_rate(&curve, 0.0, &payment_dates)?;
    let fixed_rate = config.fixed_rate.unwrap_or(swap_rate);
    let level_annuity = annuity(&curve, 0.0, &payment_dates);
    let fixed_leg = config.notional * fixed_rate * level_annuity;

    let years = config.horizon.round() as usize;
    let cap = CapSpec {
        reset_dates: (0..years).map(|k| k as f64).collect(),
        period: 1.0,
        rate: fixed_rate,
    };
    let vas_model = ShortRateModel::Vasicek(vasicek);
    let cap_vasicek = cap_price(&vas_model, &cap)?;

    let varsigma = match config.varsigma {
        Some(v) => v,
        None => co_calibrate(&vasicek, config.alpha, &cap)?.varsigma,
    };
    let lhw_model = ShortRateModel::Lhw(LhwParams::new(config.alpha, varsigma, curve)?);
    let cap_lhw = cap_price(&lhw_model, &cap)?;

    let swap_template = SwapSpec {
        notional: config.notional,
        fixed_rate,
        inception: 0.0,
        payment_dates,
        direction: SwapDirection::Receiver,
    };

    let (vas_cases, _) = run_model(&vas_model, config, &swap_template, false)?;
    let (lhw_cases, sample) = run_model(&lhw_model, config, &swap_template, true)?;

    let mut cases = vas_cases;
    cases.extend(lhw_cases);

    Ok(ExperimentReport {
        swap_rate,
        fixed_rate,
        annuity: level_annuity,
        fixed_leg,
        cap_vasicek,
        varsigma,
        cap_lhw,
        cases,
        sample_model: lhw_model.label(),
        sample,
    })
}

// ── output formatting ───────────────────────────────────────────────────

/// Numeric rendering for reports: a fixed number of significant digits, or
/// the shortest exact representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Significant(usize),
    Full,
}

impl Default for Precision {
    fn default() -> Self {
        Precision::Significant(6)
    }
}

/// Render a value in plain decimal notation. With `Significant(s)` the
/// number of decimals is chosen to expose `s` significant digits; integer
/// digits are never rounded away.
pub fn format_value(v: f64, precision: Precision) -> String {
    match precision {
        Precision::Full => format!("{v}"),
        Precision::Significant(sig) => {
            if v == 0.0 || !v.is_finite() {
                return format!("{v}");
            }
            let exponent = v.abs().log10().floor() as i64;
            let decimals = (sig as i64 - 1 - exponent).max(0) as usize;
            format!("{v:.decimals$}")
        }
    }
}

fn new_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

pub fn write_calibration_csv(
    report: &ExperimentReport,
    path: &Path,
    precision: Precision,
) -> Result<()> {
    let mut w = new_writer(path)?;
    w.write_record(["quantity", "value"])?;
    for (name, value) in [
        ("swap_rate", report.swap_rate),
        ("fixed_rate", report.fixed_rate),
        ("annuity", report.annuity),
        ("fixed_leg", report.fixed_leg),
        ("cap_vasicek", report.cap_vasicek),
        ("varsigma", report.varsigma),
        ("cap_lhw", report.cap_lhw),
    ] {
        w.write_record([name, &format_value(value, precision)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_tva_table_csv(
    report: &ExperimentReport,
    path: &Path,
    precision: Precision,
) -> Result<()> {
    let mut w = new_writer(path)?;
    w.write_record([
        "model", "direction", "csa", "tva", "cva", "dva", "lva", "rc", "ci_low", "ci_high",
    ])?;
    for case in &report.cases {
        let (lo, hi) = match &case.linear {
            Some(est) => (
                format_value(est.ci_low, precision),
                format_value(est.ci_high, precision),
            ),
            None => (String::new(), String::new()),
        };
        w.write_record([
            case.model,
            case.direction.label(),
            &case.csa_label,
            &format_value(case.tva, precision),
            &format_value(case.cva, precision),
            &format_value(case.dva, precision),
            &format_value(case.lva, precision),
            &format_value(case.rc, precision),
            &lo,
            &hi,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_exposure_profiles_csv(
    report: &ExperimentReport,
    path: &Path,
    precision: Precision,
) -> Result<()> {
    let mut w = new_writer(path)?;
    w.write_record(["model", "direction", "csa", "term", "time", "value"])?;
    for case in &report.cases {
        let p = &case.profiles;
        let series: [(&str, &[f64]); 9] = [
            ("cva", &p.cva),
            ("dva", &p.dva),
            ("lva", &p.lva),
            ("rc", &p.rc),
            ("cva_raw", &p.cva_raw),
            ("dva_raw", &p.dva_raw),
            ("lva_raw", &p.lva_raw),
            ("rc_raw", &p.rc_raw),
            ("theta", &p.theta),
        ];
        for (term, values) in series {
            for (i, &v) in values.iter().enumerate() {
                w.write_record([
                    case.model,
                    case.direction.label(),
                    &case.csa_label,
                    term,
                    &format_value(p.time[i], precision),
                    &format_value(v, precision),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_paths_sample_csv(
    report: &ExperimentReport,
    path: &Path,
    precision: Precision,
) -> Result<()> {
    let mut w = new_writer(path)?;
    w.write_record(["model", "path", "step", "time", "rate"])?;
    for row in &report.sample {
        w.write_record([
            report.sample_model,
            &row.path.to_string(),
            &row.step.to_string(),
            &format_value(row.time, precision),
            &format_value(row.rate, precision),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write the four report files into a directory, creating it if needed.
pub fn write_report(report: &ExperimentReport, dir: &Path, precision: Precision) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_calibration_csv(report, &dir.join("calibration.csv"), precision)?;
    write_tva_table_csv(report, &dir.join("tva_table.csv"), precision)?;
    write_exposure_profiles_csv(report, &dir.join("exposure_profiles.csv"), precision)?;
    write_paths_sample_csv(report, &dir.join("paths_sample.csv"), precision)?;
    Ok(())
}
