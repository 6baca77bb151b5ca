//! Acceptance run for the standard ten-year experiment. Every headline
//! requirement is checked at its stated tolerance and reported as one
//! `[PASS]`/`[FAIL]` line (run with `--nocapture` to see the lines of
//! passing tests; failing tests print them in their captured output).
//!
//! Two reference checks do not come out of the stated parameters: the
//! Gaussian cap does not price at the reference quote 20.161, and
//! consequently backing the jump scale out of that quote does not land in
//! the reference band around 17.57. Those tests compute the requirement
//! faithfully, print the values the engine actually produces, and fail.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use tva_core::math::mean_and_stderr;
use tva_core::sim::sample_ig_increment;
use tva_core::{
    cap_price, co_calibrate, knn_regress, par_swap_rate, run_experiment, swap_price, write_report,
    CapSpec, ExperimentConfig, ExperimentReport, GridSpec, InitialCurve, LhwParams, Precision,
    ShortRateModel, SwapDirection, SwapSpec, VasicekParams,
};

const SWAP_RATE_REF: f64 = 0.038859;
const CAP_REF: f64 = 20.161;
const VARSIGMA_BAND: (f64, f64) = (17.37, 17.77);

/// Reference decomposition (tva, cva, dva, lva, rc) for the twenty cases of
/// the default run, in report order: Gaussian model then jump model, the
/// receiver rows before the payer rows, conventions 1 through 5 in each
/// block. Values carry Monte Carlo noise of their own, hence the 0.3 band.
const REFERENCE_TABLE: [(f64, f64, f64, f64, f64); 20] = [
    // vasicek receiver, conventions 1-5
    (1.47, -0.06, 1.75, 0.71, -0.92),
    (1.40, -0.06, 1.75, 0.64, -0.91),
    (0.40, -0.06, 0.00, 0.76, -0.29),
    (0.66, -0.08, 0.00, 0.74, 0.00),
    (0.43, 0.00, 0.00, 0.72, -0.29),
    // vasicek payer
    (-1.90, -2.45, 0.04, -0.68, 1.17),
    (-2.64, -2.45, 0.04, -1.92, 1.67),
    (-2.67, -2.45, 0.00, -1.92, 1.68),
    (-3.59, -1.77, 0.00, -1.83, 0.00),
    (-0.50, 0.00, 0.00, -0.81, 0.31),
    // lhw receiver
    (1.34, -0.90, 2.34, 0.72, -0.85),
    (0.93, -0.90, 2.34, 0.15, -0.68),
    (-0.45, -0.90, 0.00, 0.32, 0.12),
    (-0.43, -0.76, 0.00, 0.32, 0.00),
    (0.44, 0.00, 0.00, 0.72, -0.29),
    // lhw payer
    (-2.08, -3.28, 0.64, -0.66, 1.25),
    (-3.17, -3.28, 0.64, -2.41, 1.92),
    (-3.59, -3.28, 0.00, -2.38, 2.11),
    (-4.80, -2.49, 0.00, -2.26, 0.00),
    (-0.51, 0.00, 0.00, -0.81, 0.31),
];

struct Shared {
    report: ExperimentReport,
    elapsed: Duration,
}

/// The full default experiment, run once and shared by every test that
/// reads its numbers. The stored duration backs the runtime criterion.
fn shared() -> &'static Shared {
    static CELL: OnceLock<Shared> = OnceLock::new();
    CELL.get_or_init(|| {
        let started = Instant::now();
        let report = run_experiment(&ExperimentConfig::default()).expect("default experiment");
        Shared { report, elapsed: started.elapsed() }
    })
}

fn config() -> ExperimentConfig {
    ExperimentConfig::default()
}

fn payment_dates() -> Vec<f64> {
    (1..=10).map(|k| k as f64).collect()
}

/// Prints one tagged line per checked item and panics at the end if any
/// item failed, so a partially failing test still reports every line.
struct Checklist {
    failures: Vec<String>,
}

impl Checklist {
    fn new() -> Self {
        Checklist { failures: Vec::new() }
    }

    fn item(&mut self, name: &str, ok: bool, detail: String) {
        println!("{} {name}: {detail}", if ok { "[PASS]" } else { "[FAIL]" });
        if !ok {
            self.failures.push(format!("{name}: {detail}"));
        }
    }

    fn finish(self) {
        assert!(self.failures.is_empty(), "\n{}", self.failures.join("\n"));
    }
}

fn best_of<T>(runs: usize, mut f: impl FnMut() -> T) -> (T, Duration) {
    let mut best = Duration::MAX;
    let mut out = None;
    for _ in 0..runs {
        let t0 = Instant::now();
        out = Some(f());
        best = best.min(t0.elapsed());
    }
    (out.expect("runs > 0"), best)
}

#[test]
fn swap_rate_matches_reference() {
    let mut list = Checklist::new();
    let cfg = config();
    let curve = InitialCurve::new(cfg.a, cfg.level, cfg.sigma, cfg.r0).unwrap();
    let dates = payment_dates();
    let (rate, took) = best_of(5, || par_swap_rate(&curve, 0.0, &dates).unwrap());
    let err = (rate - SWAP_RATE_REF).abs();
    list.item(
        "swap rate",
        err <= 1e-6 && took < Duration::from_millis(1),
        format!(
            "par rate {rate:.9} vs reference {SWAP_RATE_REF} (|diff| {err:.2e} <= 1e-6), \
             evaluated in {took:?} (< 1 ms)"
        ),
    );
    list.finish();
}

#[test]
fn fixed_leg_is_normalized() {
    let mut list = Checklist::new();
    let s = shared();
    let err = (s.report.fixed_leg - 100.0).abs();
    list.item(
        "fixed leg",
        err <= 0.01,
        format!(
            "notional {} prices the fixed leg at {:.6} (|diff from 100| {err:.2e} <= 0.01)",
            config().notional,
            s.report.fixed_leg
        ),
    );
    list.finish();
}

#[test]
fn gaussian_cap_matches_reference() {
    let mut list = Checklist::new();
    let cfg = config();
    let s = shared();
    let model = ShortRateModel::Vasicek(
        VasicekParams::new(cfg.a, cfg.level, cfg.sigma, cfg.r0).unwrap(),
    );
    let cap = CapSpec {
        reset_dates: (0..10).map(|k| k as f64).collect(),
        period: 1.0,
        rate: s.report.fixed_rate,
    };
    let (unit, took) = best_of(5, || cap_price(&model, &cap).unwrap());
    let value = unit * cfg.notional;
    let err = (value - CAP_REF).abs();
    list.item(
        "gaussian cap",
        err <= 0.01 && took < Duration::from_millis(10),
        format!(
            "closed-form cap on notional {} = {value:.4} vs reference {CAP_REF} \
             (|diff| {err:.4}, tolerance 0.01), evaluated in {took:?} (< 10 ms)",
            cfg.notional
        ),
    );
    list.finish();
}

#[test]
fn co_calibration_recovers_reference_scale() {
    let mut list = Checklist::new();
    let cfg = config();
    let curve = InitialCurve::new(cfg.a, cfg.level, cfg.sigma, cfg.r0).unwrap();
    let vasicek = VasicekParams::new(cfg.a, cfg.level, cfg.sigma, cfg.r0).unwrap();
    let rate = par_swap_rate(&curve, 0.0, &payment_dates()).unwrap();
    let cap = CapSpec { reset_dates: (0..10).map(|k| k as f64).collect(), period: 1.0, rate };
    let t0 = Instant::now();
    let fit = co_calibrate(&vasicek, cfg.alpha, &cap).unwrap();
    let took = t0.elapsed();
    let (lo, hi) = VARSIGMA_BAND;
    let cap_n = fit.cap_lhw * cfg.notional;
    let in_band = lo <= fit.varsigma && fit.varsigma <= hi;
    let cap_ok = (cap_n - CAP_REF).abs() <= 0.05;
    list.item(
        "co-calibration",
        in_band && cap_ok && took < Duration::from_secs(30),
        format!(
            "recovered scale {:.6} (reference band [{lo}, {hi}]), matched cap on notional \
             {cap_n:.4} vs reference {CAP_REF} +/- 0.05, solved in {took:.2?} (< 30 s)",
            fit.varsigma
        ),
    );
    list.finish();
}

#[test]
fn fourier_caplets_match_simulation() {
    let mut list = Checklist::new();
    let cfg = config();
    let s = shared();
    let curve = InitialCurve::new(cfg.a, cfg.level, cfg.sigma, cfg.r0).unwrap();
    let params = LhwParams::new(cfg.alpha, s.report.varsigma, curve).unwrap();
    let expiries: Vec<f64> = (0..10).map(|k| k as f64).collect();
    let mc = tva_core::pricing::caplet_lhw_mc_batch(
        &params,
        &expiries,
        1.0,
        s.report.fixed_rate,
        100_000,
        0.005,
        42,
    )
    .unwrap();
    let mut bad = Vec::new();
    let mut worst_z = 0.0f64;
    for (expiry, (est, se)) in expiries.iter().zip(&mc) {
        let fourier = params.caplet_fourier(*expiry, 1.0, s.report.fixed_rate).unwrap();
        let diff = (fourier - est).abs();
        if *se > 0.0 {
            worst_z = worst_z.max(diff / se);
        }
        if diff > 2.0 * se {
            bad.push(format!(
                "expiry {expiry}: transform {fourier:.3e} vs simulation {est:.3e} (se {se:.1e})"
            ));
        }
    }
    list.item(
        "fourier caplets",
        bad.is_empty(),
        if bad.is_empty() {
            format!(
                "10 expiries within 2 se of a 100k-path simulation (worst |diff|/se = {worst_z:.2})"
            )
        } else {
            format!("outside 2 se: {}", bad.join("; "))
        },
    );
    list.finish();
}

#[test]
fn linear_benchmark_brackets_the_solver() {
    let mut list = Checklist::new();
    let s = shared();
    for case in s.report.cases.iter().filter(|c| c.csa_label == "1") {
        let est = case.linear.as_ref().expect("convention 1 has a linear benchmark");
        let inside = est.ci_low <= case.tva && case.tva <= est.ci_high;
        list.item(
            &format!("linear interval, {} {}", case.model, case.direction.label()),
            inside,
            format!(
                "solver {:.4} vs 95% interval [{:.4}, {:.4}] around the forward estimate {:.4}",
                case.tva, est.ci_low, est.ci_high, est.value
            ),
        );
    }
    list.item(
        "experiment runtime",
        s.elapsed < Duration::from_secs(60),
        format!("all 20 cases solved in {:.2?}, so each case took < 60 s", s.elapsed),
    );
    list.finish();
}

#[test]
fn adjustment_table_matches_reference() {
    let mut list = Checklist::new();
    let s = shared();
    assert_eq!(s.report.cases.len(), REFERENCE_TABLE.len());
    let mut bad = Vec::new();
    let mut worst = (0.0f64, String::new());
    for (case, want) in s.report.cases.iter().zip(&REFERENCE_TABLE) {
        let name =
            format!("{} {} convention {}", case.model, case.direction.label(), case.csa_label);
        let got = [case.tva, case.cva, case.dva, case.lva, case.rc];
        let reference = [want.0, want.1, want.2, want.3, want.4];
        for (term, (g, w)) in ["tva", "cva", "dva", "lva", "rc"]
            .iter()
            .zip(got.iter().zip(&reference))
        {
            let diff = (g - w).abs();
            if diff > worst.0 {
                worst = (diff, format!("{name} {term} {g:.3} vs {w}"));
            }
            if diff > 0.3 {
                bad.push(format!("{name} {term} {g:.3} vs {w} (|diff| {diff:.3})"));
            }
        }
    }
    list.item(
        "adjustment table",
        bad.is_empty(),
        if bad.is_empty() {
            format!(
                "all 100 entries of the 20-case table within 0.3 of reference \
                 (largest gap {:.3}: {})",
                worst.0, worst.1
            )
        } else {
            format!("{} entries out of tolerance: {}", bad.len(), bad.join("; "))
        },
    );

    // Conventions that price a term at an exactly zero coefficient or an
    // exactly zero exposure must produce 0.0, not merely something small.
    let mut nonzero = Vec::new();
    for case in &s.report.cases {
        let name =
            format!("{} {} convention {}", case.model, case.direction.label(), case.csa_label);
        let mut expect_zero = |term: &str, value: f64| {
            if value != 0.0 {
                nonzero.push(format!("{name} {term} = {value:e}"));
            }
        };
        match case.csa_label.as_str() {
            "3" => expect_zero("dva", case.dva),
            "4" => {
                expect_zero("dva", case.dva);
                expect_zero("rc", case.rc);
            }
            "5" => {
                expect_zero("cva", case.cva);
                expect_zero("dva", case.dva);
            }
            _ => {}
        }
    }
    list.item(
        "structural zeros",
        nonzero.is_empty(),
        if nonzero.is_empty() {
            "dva vanishes exactly under conventions 3-5, rc under 4, cva under 5".into()
        } else {
            format!("expected exact zeros, got: {}", nonzero.join("; "))
        },
    );
    list.finish();
}

#[test]
fn decomposition_closes_on_the_adjustment() {
    let mut list = Checklist::new();
    let s = shared();
    let mut worst = (0.0f64, String::new());
    for case in &s.report.cases {
        let gap = (case.cva + case.dva + case.lva + case.rc - case.tva).abs();
        if gap > worst.0 {
            worst = (
                gap,
                format!("{} {} convention {}", case.model, case.direction.label(), case.csa_label),
            );
        }
    }
    list.item(
        "decomposition closure",
        worst.0 <= 0.05,
        format!("max |cva+dva+lva+rc - tva| = {:.4} ({}) <= 0.05", worst.0, worst.1),
    );
    list.finish();
}

/// Independent transcription of the neighbor-regression contract: neighbors
/// ranked by distance, ties broken towards the point itself and then towards
/// its left in the (value, index) sort, nearer sorted positions first; the
/// chosen responses are summed in ascending sorted position.
fn knn_oracle(x: &[f64], y: &[f64], q: usize) -> Vec<f64> {
    let m = x.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| x[i].partial_cmp(&x[j]).unwrap().then(i.cmp(&j)));
    let mut pos = vec![0usize; m];
    for (p, &i) in order.iter().enumerate() {
        pos[i] = p;
    }
    (0..m)
        .map(|i| {
            let key = |c: usize| -> (f64, u8, usize) {
                let dist = (x[c] - x[i]).abs();
                if c == i {
                    (dist, 0, 0)
                } else if pos[c] < pos[i] {
                    (dist, 1, pos[i] - pos[c])
                } else {
                    (dist, 2, pos[c] - pos[i])
                }
            };
            let mut cand: Vec<usize> = (0..m).collect();
            cand.sort_by(|&a, &b| {
                let (da, sa, oa) = key(a);
                let (db, sb, ob) = key(b);
                da.partial_cmp(&db).unwrap().then(sa.cmp(&sb)).then(oa.cmp(&ob))
            });
            let mut chosen = cand[..q].to_vec();
            chosen.sort_by_key(|&a| pos[a]);
            let mut acc = 0.0;
            for &a in &chosen {
                acc += y[a];
            }
            acc / q as f64
        })
        .collect()
}

#[test]
fn property_contracts_hold() {
    let mut list = Checklist::new();
    let cfg = config();

    // Jump increment law: moments and Laplace transform of the simulated
    // subordinator steps against the closed forms.
    {
        let (dt, vs) = (0.05, tva_core::DEFAULT_VARSIGMA);
        let mut rng = ChaCha8Rng::seed_from_u64(2026);
        let m = 400_000;
        let draws: Vec<f64> = (0..m).map(|_| sample_ig_increment(dt, vs, &mut rng)).collect();
        let positive = draws.iter().all(|&x| x > 0.0);
        let (mean, se) = mean_and_stderr(&draws);
        let want_mean = dt / vs;
        let var =
            draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m as f64 - 1.0);
        let want_var = dt / vs.powi(3);
        let transformed: Vec<f64> = draws.iter().map(|x| (-x).exp()).collect();
        let (lap, lap_se) = mean_and_stderr(&transformed);
        let psi = vs * (1.0 - (1.0 + 2.0 / (vs * vs)).sqrt());
        let want_lap = (dt * psi).exp();
        let ok = positive
            && (mean - want_mean).abs() <= 3.0 * se
            && (var - want_var).abs() <= 0.05 * want_var
            && (lap - want_lap).abs() <= 3.0 * lap_se;
        list.item(
            "property: jump increment law",
            ok,
            format!(
                "400k draws: mean {mean:.6e} vs {want_mean:.6e} (3 se), variance {var:.3e} vs \
                 {want_var:.3e} (5%), transform {lap:.8} vs {want_lap:.8} (3 se), all positive: \
                 {positive}"
            ),
        );
    }

    // Euler paths of the Gaussian model against the analytic terminal law.
    {
        let model = ShortRateModel::Vasicek(
            VasicekParams::new(cfg.a, cfg.level, cfg.sigma, cfg.r0).unwrap(),
        );
        let grid = GridSpec::new(10.0, 200).unwrap();
        let m = 20_000;
        let terminal = model.simulate(grid, m, 11).unwrap().column(200);
        let (mean, se) = mean_and_stderr(&terminal);
        let want_mean = cfg.level + (cfg.r0 - cfg.level) * (-cfg.a * 10.0).exp();
        let var =
            terminal.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (m as f64 - 1.0);
        let want_var = cfg.sigma * cfg.sigma * (1.0 - (-2.0 * cfg.a * 10.0).exp()) / (2.0 * cfg.a);
        let ok = (mean - want_mean).abs() <= 3.0 * se
            && (var - want_var).abs() <= 0.05 * want_var;
        list.item(
            "property: gaussian path moments",
            ok,
            format!(
                "terminal mean {mean:.6} vs {want_mean:.6} (3 se = {:.1e}), variance {var:.3e} \
                 vs {want_var:.3e} (5%)",
                3.0 * se
            ),
        );
    }

    // The jump model reprices the shared initial curve at time zero.
    {
        let curve = InitialCurve::new(cfg.a, cfg.level, cfg.sigma, cfg.r0).unwrap();
        let model = ShortRateModel::Lhw(
            LhwParams::new(cfg.alpha, tva_core::DEFAULT_VARSIGMA, curve).unwrap(),
        );
        let mut worst = 0.0f64;
        for t in [0.25, 0.5, 1.0, 2.0, 3.7, 5.0, 7.3, 10.0] {
            let gap = (model.bond(0.0, t, cfg.r0).unwrap() - curve.discount(t)).abs();
            worst = worst.max(gap);
        }
        list.item(
            "property: initial-curve fit",
            worst <= 1e-6,
            format!("max |time-zero bond - curve discount| = {worst:.2e} <= 1e-6, 8 maturities"),
        );
    }

    // Neighbor regression equals its brute-force oracle, bit for bit, on
    // scrambled and on heavily tied inputs.
    {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = 100;
        let scrambled: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let tied: Vec<f64> = (0..m).map(|i| (i % 25) as f64 * 0.3).collect();
        let y: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
        let mut ok = true;
        for x in [&scrambled, &tied] {
            for q in [1usize, 3, 5, 17, 100] {
                ok &= knn_regress(x, &y, q).unwrap() == knn_oracle(x, &y, q);
            }
        }
        list.item(
            "property: neighbor regression oracle",
            ok,
            "regression output identical to the oracle for q in {1, 3, 5, 17, 100} on 100 \
             scrambled and 100 tied points"
                .into(),
        );
    }

    // Payer prices are the exact negation of receiver prices.
    {
        let curve = InitialCurve::new(cfg.a, cfg.level, cfg.sigma, cfg.r0).unwrap();
        let rate = par_swap_rate(&curve, 0.0, &payment_dates()).unwrap();
        let receiver = SwapSpec {
            notional: cfg.notional,
            fixed_rate: rate,
            inception: 0.0,
            payment_dates: payment_dates(),
            direction: SwapDirection::Receiver,
        };
        let payer = SwapSpec { direction: SwapDirection::Payer, ..receiver.clone() };
        let models = [
            ShortRateModel::Vasicek(VasicekParams::new(cfg.a, cfg.level, cfg.sigma, cfg.r0).unwrap()),
            ShortRateModel::Lhw(LhwParams::new(cfg.alpha, tva_core::DEFAULT_VARSIGMA, curve).unwrap()),
        ];
        let mut ok = true;
        for model in &models {
            for (t, fixing) in [(0.0, None), (2.3, Some(1.012)), (7.9, Some(0.97))] {
                for r in [-0.01, 0.0, 0.02, 0.05, 0.09] {
                    let long = swap_price(t, r, fixing, &receiver, model).unwrap();
                    let short = swap_price(t, r, fixing, &payer, model).unwrap();
                    ok &= short == -long;
                }
            }
        }
        list.item(
            "property: payer mirrors receiver",
            ok,
            "payer price equals the exact negation of the receiver price at 30 (model, time, \
             rate) points"
                .into(),
        );
    }

    // The same seed writes byte-identical report files.
    {
        let mut small = config();
        small.paths = 300;
        small.steps = 40;
        small.csas.truncate(2);
        let write = || {
            let report = run_experiment(&small).unwrap();
            let dir = TempDir::new().unwrap();
            write_report(&report, dir.path(), Precision::Significant(6)).unwrap();
            ["calibration.csv", "tva_table.csv", "exposure_profiles.csv", "paths_sample.csv"]
                .map(|f| std::fs::read(dir.path().join(f)).unwrap())
        };
        let ok = write() == write();
        list.item(
            "property: seed determinism",
            ok,
            "two runs of one seed wrote byte-identical calibration, table, profile and path \
             files"
                .into(),
        );
    }

    list.finish();
}
