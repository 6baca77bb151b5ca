use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tva_core::{
    cap_price, co_calibrate, run_experiment, write_report, CapSpec, Error, ExperimentConfig,
    ExperimentReport, InitialCurve, LhwParams, Precision, Result, ShortRateModel, VasicekParams,
};

#[derive(Parser)]
#[command(
    name = "tva",
    version,
    about = "Swap valuation adjustments under bilateral default risk and funding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Simulation seed; overrides the TVA_SEED variable and the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Number of simulated paths.
    #[arg(long, global = true)]
    paths: Option<usize>,

    /// Number of grid steps over the horizon.
    #[arg(long, global = true)]
    steps: Option<usize>,

    /// Experiment file in the key = value grammar.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for the CSV report files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Significant digits in printed and written numbers, or "full".
    #[arg(long, global = true, default_value = "6")]
    precision: String,
}

#[derive(Subcommand)]
enum Command {
    /// Back the jump scale out of the Gaussian cap price.
    Calibrate,
    /// Print the curve, swap and cap quantities of the configured setup.
    Price,
    /// Value every configured case and print the adjustment table.
    Tva,
    /// Run the reference experiment end to end and write the CSV report.
    ReproducePaper,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn parse_precision(raw: &str) -> Result<Precision> {
    if raw == "full" {
        return Ok(Precision::Full);
    }
    match raw.parse::<usize>() {
        Ok(n) if (1..=17).contains(&n) => Ok(Precision::Significant(n)),
        _ => Err(Error::invalid(format!(
            "precision must be 1..=17 or \"full\", got {raw:?}"
        ))),
    }
}

fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    } else if let Ok(raw) = std::env::var("TVA_SEED") {
        config.seed = raw
            .parse()
            .map_err(|_| Error::invalid(format!("TVA_SEED: expected an integer, got {raw:?}")))?;
    }
    if let Some(paths) = cli.paths {
        config.paths = paths;
    }
    if let Some(steps) = cli.steps {
        config.steps = steps;
    }
    config.validate()?;
    Ok(config)
}

/// Instruments shared by the informational verbs.
struct Setup {
    curve: InitialCurve,
    vasicek: VasicekParams,
    swap_rate: f64,
    fixed_rate: f64,
    annuity: f64,
    cap: CapSpec,
}

fn setup(config: &ExperimentConfig) -> Result<Setup> {
    let curve = InitialCurve::new(config.a, config.level, config.sigma, config.r0)?;
    let vasicek = VasicekParams::new(config.a, config.level, config.sigma, config.r0)?;
    let years = config.horizon.round() as usize;
    let payment_dates: Vec<f64> = (1..=years).map(|k| k as f64).collect();
    let swap_rate = tva_core::par_swap_rate(&curve, 0.0, &payment_dates)?;
    let fixed_rate = config.fixed_rate.unwrap_or(swap_rate);
    let annuity = tva_core::annuity(&curve, 0.0, &payment_dates);
    let cap = CapSpec {
        reset_dates: (0..years).map(|k| k as f64).collect(),
        period: 1.0,
        rate: fixed_rate,
    };
    Ok(Setup { curve, vasicek, swap_rate, fixed_rate, annuity, cap })
}

fn run(cli: Cli) -> Result<()> {
    let precision = parse_precision(&cli.precision)?;
    let config = resolve_config(&cli)?;
    let fmt = |v: f64| tva_core::report::format_value(v, precision);

    match cli.command {
        Command::Calibrate => {
            let s = setup(&config)?;
            let co = co_calibrate(&s.vasicek, config.alpha, &s.cap)?;
            println!("swap rate        {}", fmt(s.swap_rate));
            println!("cap strike       {}", fmt(s.cap.rate));
            println!("cap (gaussian)   {}", fmt(co.cap_vasicek));
            println!("varsigma         {}", fmt(co.varsigma));
            println!("cap (jump)       {}", fmt(co.cap_lhw));
            println!("residual         {:e}", co.cap_lhw - co.cap_vasicek);
        }
        Command::Price => {
            let s = setup(&config)?;
            let varsigma = match config.varsigma {
                Some(v) => v,
                None => co_calibrate(&s.vasicek, config.alpha, &s.cap)?.varsigma,
            };
            let lhw = LhwParams::new(config.alpha, varsigma, s.curve)?;
            let vas_model = ShortRateModel::Vasicek(s.vasicek);
            let lhw_model = ShortRateModel::Lhw(lhw);

            println!("zero-coupon curve");
            println!("{:>6} {:>12}", "t", "B0(t)");
            let years = config.horizon.round() as usize;
            for t in 1..=years {
                println!("{:>6} {:>12}", t, fmt(s.curve.discount(t as f64)));
            }
            println!();
            println!("swap rate   {}", fmt(s.swap_rate));
            println!("fixed rate  {}", fmt(s.fixed_rate));
            println!("annuity     {}", fmt(s.annuity));
            println!(
                "fixed leg   {}",
                fmt(config.notional * s.fixed_rate * s.annuity)
            );
            println!();
            println!("caplets at strike {} (varsigma {})", fmt(s.cap.rate), fmt(varsigma));
            println!("{:>6} {:>12} {:>12}", "expiry", "gaussian", "jump");
            for &expiry in &s.cap.reset_dates {
                let g = tva_core::pricing::caplet_vasicek(&s.vasicek, expiry, s.cap.period, s.cap.rate)?;
                let j = tva_core::pricing::caplet_lhw_fourier(&lhw, expiry, s.cap.period, s.cap.rate)?;
                println!("{:>6} {:>12} {:>12}", expiry, fmt(g), fmt(j));
            }
            println!(
                "{:>6} {:>12} {:>12}",
                "cap",
                fmt(cap_price(&vas_model, &s.cap)?),
                fmt(cap_price(&lhw_model, &s.cap)?)
            );
        }
        Command::Tva | Command::ReproducePaper => {
            let report = run_experiment(&config)?;
            print_calibration(&report, &fmt);
            println!();
            print_cases(&report, &fmt);
            let out = match (&cli.command, cli.out) {
                (_, Some(dir)) => Some(dir),
                (Command::ReproducePaper, None) => Some(PathBuf::from("tva-report")),
                _ => None,
            };
            if let Some(dir) = out {
                write_report(&report, &dir, precision)?;
                println!();
                println!("report written to {}", dir.display());
            }
        }
    }
    Ok(())
}

fn print_calibration(report: &ExperimentReport, fmt: &dyn Fn(f64) -> String) {
    println!("swap rate      {}", fmt(report.swap_rate));
    println!("fixed leg      {}", fmt(report.fixed_leg));
    println!("cap (gaussian) {}", fmt(report.cap_vasicek));
    println!("varsigma       {}", fmt(report.varsigma));
    println!("cap (jump)     {}", fmt(report.cap_lhw));
}

fn print_cases(report: &ExperimentReport, fmt: &dyn Fn(f64) -> String) {
    println!(
        "{:<9} {:<9} {:<4} {:>9} {:>9} {:>9} {:>9} {:>9}  {}",
        "model", "direction", "csa", "tva", "cva", "dva", "lva", "rc", "95% band (linear)"
    );
    for case in &report.cases {
        let band = match &case.linear {
            Some(est) => format!("[{}, {}]", fmt(est.ci_low), fmt(est.ci_high)),
            None => String::new(),
        };
        println!(
            "{:<9} {:<9} {:<4} {:>9} {:>9} {:>9} {:>9} {:>9}  {}",
            case.model,
            case.direction.label(),
            case.csa_label,
            fmt(case.tva),
            fmt(case.cva),
            fmt(case.dva),
            fmt(case.lva),
            fmt(case.rc),
            band
        );
    }
}
