//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use clap::Parser;
use mrdmd::dmd::{dmd, TruncationRule};
use mrdmd::ingest::write_csv;
use mrdmd::modes::{classify, mode_reports, ModeReport};
use mrdmd::mrdmd::{plan, Rational};
use mrdmd::siggen::{generate, ModeSpec};
use mrdmd::stacking::{delay_embed, shifted_pair};
use mrdmd_cli::config::{AnalyzeArgs, RunConfig};
use mrdmd_cli::pipeline::{analyze_dmd, analyze_mrdmd, prepare, run_dmd, run_mrdmd};
use mrdmd_cli::{run, Cli};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use tempfile::TempDir;

#[path = "../../core/tests/support/checks.rs"]
mod checks;

const CASES: u32 = 128;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn profile_args(profile: &str, mu: usize, levels: Option<usize>, gap: Option<(usize, usize)>) -> RunConfig {
    let args = AnalyzeArgs {
        profile: Some(profile.into()),
        mu: Some(mu),
        g: Some(4.0),
        termination_level: levels,
        gap_start: gap.map(|g| g.0),
        gap_length: gap.map(|g| g.1),
        ..Default::default()
    };
    RunConfig::from_args(args).unwrap()
}

fn plan_reproduction() -> Outcome {
    let start = Instant::now();
    let p16 = plan(4000, 4e-4, 16, 4.0, None);
    let p50 = plan(4000, 4e-4, 50, 4.0, None);
    let p50_l6 = plan(4000, 4e-4, 50, 4.0, Some(6));
    let elapsed = start.elapsed();
    let (p16, p50, p50_l6) = match (p16, p50, p50_l6) {
        (Ok(a), Ok(b), Ok(c)) => (a, b, c),
        e => return outcome(false, format!("plan rejected: {e:?}")),
    };
    let mut problems = Vec::new();
    if p16.levels != 8 {
        problems.push(format!("L = {} (want 8)", p16.levels));
    }
    if p16.rho != PI / 4.0 {
        problems.push(format!("rho = {}", p16.rho));
    }
    for l in &p16.per_level {
        let want = Rational::from_integer(5 << (l.level - 1));
        if l.f_m != want || l.f_slow_max != want / 4 {
            problems.push(format!(
                "mu=16 level {}: f_m {} f_slow {}",
                l.level, l.f_m, l.f_slow_max
            ));
        }
    }
    for p in [&p50, &p50_l6] {
        for l in &p.per_level {
            let want = Rational::new(15625, 1000) * Rational::from_integer(1 << (l.level - 1));
            if l.f_m != want {
                problems.push(format!("mu=50 level {}: f_m {}", l.level, l.f_m));
            }
        }
    }
    if p50_l6.levels != 6 {
        problems.push(format!("override gave L = {}", p50_l6.levels));
    }
    if elapsed >= Duration::from_millis(1) {
        problems.push(format!("runtime {:.3} ms", ms(elapsed)));
    }
    let f_m: Vec<String> = p16.per_level.iter().map(|l| l.f_m.to_string()).collect();
    let detail = format!(
        "L={} rho=pi/4 f_m={{{}}} Hz; mu=50 f_m=15.625*2^(l-1) for L={} and L=6 [{:.3} ms]{}",
        p16.levels,
        f_m.join(", "),
        p50.levels,
        ms(elapsed),
        if problems.is_empty() {
            String::new()
        } else {
            format!("; {}", problems.join("; "))
        }
    );
    outcome(problems.is_empty(), detail)
}

fn dmd_oracle() -> Outcome {
    let planted = [ModeSpec::new(8.6, 0.0, 6.0, 0.0), ModeSpec::new(3.0, -2.0, 4.0, 0.5)];
    let start = Instant::now();
    let rec = generate(&planted, 0.0, 2500.0, 2.0, 0.0, 0).unwrap();
    let snap = delay_embed(&rec, "signal", 200).unwrap();
    let (x1, x2) = shifted_pair(&snap).unwrap();
    let d = dmd(x1.as_ref(), x2.as_ref(), &TruncationRule::default(), 4e-4).unwrap();
    let mut reports = mode_reports(&d, 2500.0, x1.ncols(), 1, 0, None, 0.5);
    classify(&mut reports, 0.5);
    let elapsed = start.elapsed();
    let mut pass = elapsed < Duration::from_secs(5);
    let mut parts = Vec::new();
    for m in &planted {
        let hit = reports.iter().filter(|r| r.pair).min_by(|a, b| {
            (a.frequency_hz - m.frequency_hz)
                .abs()
                .total_cmp(&(b.frequency_hz - m.frequency_hz).abs())
        });
        match hit {
            Some(r) => {
                let f_rel = (r.frequency_hz - m.frequency_hz).abs() / m.frequency_hz;
                let g_abs = (r.growth_rate - m.growth_rate).abs();
                let g_ok = g_abs <= 0.05 || g_abs <= 0.01 * m.growth_rate.abs();
                pass &= f_rel <= 1e-3 && g_ok;
                parts.push(format!(
                    "{} Hz -> {:.6} Hz (rel {:.1e}), sigma {} -> {:.6} (abs {:.1e})",
                    m.frequency_hz, r.frequency_hz, f_rel, m.growth_rate, r.growth_rate, g_abs
                ));
            }
            None => {
                pass = false;
                parts.push(format!("{} Hz not found", m.frequency_hz));
            }
        }
    }
    outcome(
        pass,
        format!("rank {}; {} [{:.0} ms]", d.rank(), parts.join("; "), ms(elapsed)),
    )
}

fn lfo_gapped() -> Outcome {
    let cfg = profile_args("lfo_udc", 16, None, Some((2000, 250)));
    let start = Instant::now();
    let prep = prepare(&cfg).unwrap();
    let run = analyze_mrdmd(&prep, &cfg).unwrap();
    let elapsed = start.elapsed();
    let rmse = prep.rmse(&run.reconstruction).unwrap();
    let rms = prep.signal_rms().unwrap();
    let (dominant_ok, dom) = match run.dominant() {
        Some(d) => (
            (d.frequency_hz - 8.6).abs() <= 0.2 && d.level == 4,
            format!(
                "{:.4} Hz sigma {:.3} at level {} bin {}",
                d.frequency_hz, d.growth_rate, d.level, d.bin
            ),
        ),
        None => (false, "none".into()),
    };
    let rmse_ok = rmse <= 0.05 * rms;
    let best_l4 = run
        .result
        .all_modes
        .iter()
        .filter(|m| m.pair && m.level == 4 && (m.frequency_hz - 8.6).abs() <= 0.2)
        .count();
    outcome(
        dominant_ok && rmse_ok && elapsed < Duration::from_secs(30),
        format!(
            "dominant {dom} (want 8.6 +- 0.2 Hz at level 4; {best_l4} level-4 bins hold 8.6 Hz); RMSE {:.3} = {:.2}% of RMS {:.2} [{:.0} ms]",
            rmse,
            100.0 * rmse / rms,
            rms,
            ms(elapsed)
        ),
    )
}

fn ac_sidebands() -> Outcome {
    let cfg = profile_args("ac_in", 50, Some(6), None);
    let start = Instant::now();
    let prep = prepare(&cfg).unwrap();
    let run = analyze_mrdmd(&prep, &cfg).unwrap();
    let elapsed = start.elapsed();
    let level5: Vec<&ModeReport> = run.result.all_modes.iter().filter(|m| m.level == 5).collect();
    let near = |m: &ModeReport, f: f64| m.pair && (m.frequency_hz - f).abs() <= 0.5;
    let targets = [50.0, 41.4, 58.6];
    let found: Vec<bool> = targets.iter().map(|&f| level5.iter().any(|m| near(m, f))).collect();
    let others_max = level5
        .iter()
        .filter(|m| !targets.iter().any(|&f| near(m, f)))
        .map(|m| m.integral_contribution)
        .fold(0.0, f64::max);
    let sideband_ic = |f: f64| {
        level5
            .iter()
            .filter(|m| near(m, f))
            .map(|m| m.integral_contribution)
            .fold(None, |a: Option<f64>, x| Some(a.map_or(x, |a| a.max(x))))
    };
    let lower = sideband_ic(41.4);
    let upper = sideband_ic(58.6);
    let outrank = matches!((lower, upper), (Some(a), Some(b)) if a > others_max && b > others_max);
    let freqs: Vec<String> = level5
        .iter()
        .filter(|m| m.pair)
        .map(|m| format!("{:.2}", m.frequency_hz))
        .collect();
    let mut freqs_sorted = freqs.clone();
    freqs_sorted.sort();
    freqs_sorted.dedup();
    let fmt_ic = |x: Option<f64>| x.map_or("absent".into(), |v| format!("{v:.1}"));
    outcome(
        found.iter().all(|&b| b) && outrank && elapsed < Duration::from_secs(30),
        format!(
            "level-5 pairs at {{{}}} Hz; 50 {} 41.4 {} 58.6 {}; IC 41.4={} 58.6={} vs other max {:.1} [{:.0} ms]",
            freqs_sorted.join(", "),
            if found[0] { "found" } else { "MISSING" },
            if found[1] { "found" } else { "MISSING" },
            if found[2] { "found" } else { "MISSING" },
            fmt_ic(lower),
            fmt_ic(upper),
            others_max,
            ms(elapsed)
        ),
    )
}

fn robustness() -> Outcome {
    let cfg = profile_args("lfo_udc", 16, None, Some((2000, 250)));
    let prep = prepare(&cfg).unwrap();
    let truth = prep.truth.unwrap();
    let d = analyze_dmd(&prep, &cfg).unwrap();
    let m = analyze_mrdmd(&prep, &cfg).unwrap();
    let err = |r: Option<&ModeReport>| r.map(|r| (r.growth_rate - truth.growth_rate).abs());
    let (de, me) = (err(d.dominant()), err(m.dominant()));
    let (dr, mr) = (
        prep.rmse(&d.reconstruction).unwrap(),
        prep.rmse(&m.reconstruction).unwrap(),
    );
    let damping_ok = matches!((de, me), (Some(a), Some(b)) if b < a);
    let ratio_ok = dr >= 2.0 * mr;
    outcome(
        damping_ok && ratio_ok,
        format!(
            "growth-rate error MR-DMD {} vs DMD {} ({}); RMSE DMD {:.3} / MR-DMD {:.3} = {:.2}x ({})",
            me.map_or("n/a".into(), |v| format!("{v:.3}")),
            de.map_or("n/a".into(), |v| format!("{v:.3}")),
            if damping_ok { "ok" } else { "not smaller" },
            dr,
            mr,
            dr / mr,
            if ratio_ok { "ok" } else { "below 2x" }
        ),
    )
}

fn run_property<S: Strategy>(name: &str, strategy: S, test: impl Fn(S::Value) -> checks::Check) -> Result<(), String> {
    let config = Config {
        failure_persistence: None,
        ..Config::with_cases(CASES)
    };
    let mut runner = TestRunner::new(config);
    runner.run(&strategy, test).map_err(|e| format!("{name}: {e}"))
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

/// Analyses a small generated file twice (second time on three threads) and
/// compares every output file byte for byte.
fn golden_bytes(case: (u64, f64, f64, f64, f64, usize)) -> checks::Check {
    let (seed, f, sigma, amp, dc, mu) = case;
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("in.csv");
    let rec = generate(&[ModeSpec::new(f, sigma, amp, 0.3)], dc, 500.0, 0.6, 0.05, seed).unwrap();
    write_csv(&rec, &csv, true).unwrap();
    let mut outputs = Vec::new();
    for (k, threads) in [1usize, 3].into_iter().enumerate() {
        let out = dir.path().join(format!("run{k}"));
        let args = AnalyzeArgs {
            input: Some(csv.clone()),
            time_column: Some(true),
            stack: Some(40),
            mu: Some(mu),
            threads: Some(threads),
            out: Some(out.clone()),
            ..Default::default()
        };
        let cfg = RunConfig::from_args(args).unwrap();
        fs::create_dir_all(&out).unwrap();
        run_dmd(&RunConfig {
            out_dir: out.join("dmd"),
            ..cfg.clone()
        })
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
        run_mrdmd(&RunConfig {
            out_dir: out.join("mrdmd"),
            ..cfg
        })
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
        outputs.push((read_dir_bytes(&out.join("dmd")), read_dir_bytes(&out.join("mrdmd"))));
    }
    prop_assert!(!outputs[0].1.is_empty());
    prop_assert!(outputs[0] == outputs[1], "outputs differ between runs");
    Ok(())
}

fn golden_plan() -> Result<(), String> {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let cli = Cli::try_parse_from([
        "mrdmd",
        "analyze",
        "plan",
        "--columns",
        "4000",
        "--dt",
        "4e-4",
        "--mu",
        "16",
        "-o",
        out,
    ])
    .map_err(|e| e.to_string())?;
    run(cli).map_err(|e| e.to_string())?;
    let got = fs::read(dir.path().join("plan.csv")).unwrap();
    let want = fs::read(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/plan_n4000_mu16.csv")).unwrap();
    if got == want {
        Ok(())
    } else {
        Err("plan.csv differs from tests/golden/plan_n4000_mu16.csv".into())
    }
}

fn property_suites() -> Outcome {
    let start = Instant::now();
    let results = [
        run_property(
            "conjugate closure",
            checks::real_matrix(8, 14),
            checks::conjugate_closure,
        ),
        run_property(
            "hankel structure",
            (prop::collection::vec(-100.0..100.0f64, 3..80), 0.0..1.0f64),
            |(v, frac)| checks::hankel_structure(v, frac),
        ),
        run_property(
            "screening brute force",
            (
                prop::collection::vec((0.0..2.0f64, -PI..PI), 0..20),
                any::<bool>(),
                1.5..10.0f64,
            ),
            |(p, z, g)| checks::screening_matches_brute_force(p, z, g),
        ),
        run_property(
            "per-level additivity",
            (checks::small_signal(), 4usize..9),
            |(x, mu)| checks::per_level_additivity(x, mu),
        ),
        run_property(
            "omega round trip",
            (-200.0..200.0f64, -0.999..0.999f64, 1.0..5000.0f64),
            |(re, frac, f_sp)| checks::omega_round_trip(re, frac, f_sp),
        ),
        run_property(
            "IC gauge invariance",
            (
                prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..10),
                (0.0..1.5f64, -PI..PI),
                (-5.0..5.0f64, -5.0..5.0f64),
                (0.1..10.0f64, -PI..PI),
                1usize..64,
            ),
            |(phi, lam, b, c, h)| checks::ic_gauge_invariance(phi, lam, b, c, h),
        ),
        run_property(
            "golden byte stability",
            (
                any::<u64>(),
                1.0..40.0f64,
                -2.0..0.5f64,
                0.5..5.0f64,
                -5.0..5.0f64,
                4usize..12,
            ),
            golden_bytes,
        ),
        golden_plan(),
    ];
    let failures: Vec<String> = results.into_iter().filter_map(Result::err).collect();
    let detail = if failures.is_empty() {
        format!(
            "7 properties x {CASES} cases (conjugate closure, Hankel structure, screening, per-level additivity, omega round trip, IC gauge, golden bytes) and golden plan file [{:.0} ms]",
            ms(start.elapsed())
        )
    } else {
        failures.join(" | ")
    };
    outcome(failures.is_empty(), detail)
}

fn main() {
    faer::set_global_parallelism(faer::Par::Seq);
    let criteria: [Criterion; 6] = [
        ("1 plan reproduction", plan_reproduction),
        ("2 DMD oracle recovery", dmd_oracle),
        ("3 MR-DMD LFO surrogate", lfo_gapped),
        ("4 MR-DMD AC surrogate", ac_sidebands),
        ("5 robustness comparison", robustness),
        ("6 property suites", property_suites),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let o = f();
        failed += usize::from(!o.pass);
        println!(
            "{} criterion {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", 6 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
