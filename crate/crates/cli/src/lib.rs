//! Command-line front end for DMD and MR-DMD oscillation analysis.
//!
//! The binary is a thin wrapper around [`run`]; the pipeline functions are
//! public so tests and other tools can drive them without a subprocess.

pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mrdmd::ingest::{inject_gap, write_csv, write_csv_to};
use mrdmd::modes::ModeReport;
use mrdmd::mrdmd::plan;
use mrdmd::siggen::Profile;

use crate::config::{AnalyzeArgs, RunConfig, DEFAULT_G, DEFAULT_MU, DEFAULT_SEED};
use crate::error::{CliError, Result};
use crate::output::{plan_rows, write_table, PLAN_HEADER};

#[derive(Debug, Parser)]
#[command(
    name = "mrdmd",
    version,
    about = "Oscillation mode identification with DMD and multi-resolution DMD"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analyse a measurement or synthetic profile.
    #[command(subcommand)]
    Analyze(Analyze),
    /// Write a synthetic profile to CSV.
    Generate(GenerateArgs),
}

#[derive(Debug, Subcommand)]
pub enum Analyze {
    /// Single-window DMD.
    Dmd(AnalyzeArgs),
    /// Multi-resolution DMD.
    Mrdmd(AnalyzeArgs),
    /// Run both methods on the same data and compare against the planted mode.
    Compare(AnalyzeArgs),
    /// Print the MR-DMD level table without analysing data.
    Plan(PlanArgs),
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    /// Snapshot columns n.
    #[arg(long, env = "MRDMD_COLUMNS")]
    pub columns: usize,
    /// Sample interval in seconds.
    #[arg(long, env = "MRDMD_DT")]
    pub dt: f64,
    #[arg(long, env = "MRDMD_MU", default_value_t = DEFAULT_MU)]
    pub mu: usize,
    #[arg(long, env = "MRDMD_G", default_value_t = DEFAULT_G)]
    pub g: f64,
    #[arg(long, env = "MRDMD_TERMINATION_LEVEL")]
    pub termination_level: Option<usize>,
    /// Also write plan.csv into this directory.
    #[arg(long, short = 'o', env = "MRDMD_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// Profile name (lfo_udc, ac_in).
    #[arg(long, env = "MRDMD_PROFILE")]
    pub profile: String,
    #[arg(long, env = "MRDMD_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Override the profile's noise standard deviation.
    #[arg(long, env = "MRDMD_NOISE_STD")]
    pub noise_std: Option<f64>,
    #[arg(long, env = "MRDMD_GAP_START", requires = "gap_length")]
    pub gap_start: Option<usize>,
    #[arg(long, env = "MRDMD_GAP_LENGTH", requires = "gap_start")]
    pub gap_length: Option<usize>,
    /// Output file, or `-` for standard output.
    #[arg(long, short = 'o', default_value = "-")]
    pub output: PathBuf,
}

fn describe(dominant: Option<&ModeReport>) -> String {
    match dominant {
        Some(d) => format!(
            "dominant mode {:.4} Hz, growth rate {:.4} 1/s ({}), level {}",
            d.frequency_hz,
            d.growth_rate,
            d.damping_class.as_str(),
            d.level
        ),
        None => "no oscillatory mode identified".into(),
    }
}

fn generate(args: &GenerateArgs) -> Result<String> {
    let mut profile: Profile = args.profile.parse()?;
    if let Some(s) = args.noise_std {
        profile.noise_std = s;
    }
    let rec = profile.generate(args.seed)?;
    let rec = match (args.gap_start, args.gap_length) {
        (Some(s), Some(l)) => inject_gap(&rec, s, l)?,
        _ => rec,
    };
    if args.output.as_os_str() == "-" {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        write_csv_to(&rec, &mut lock, true).map_err(|e| CliError::io("<stdout>", e))?;
        lock.flush().map_err(|e| CliError::io("<stdout>", e))?;
        Ok(String::new())
    } else {
        write_csv(&rec, &args.output, true)?;
        Ok(format!("wrote {} samples to {}", rec.len(), args.output.display()))
    }
}

fn run_plan(args: &PlanArgs) -> Result<String> {
    let p = plan(args.columns, args.dt, args.mu, args.g, args.termination_level)?;
    if let Some(dir) = &args.out {
        write_table(&dir.join("plan.csv"), &PLAN_HEADER, plan_rows(&p))?;
    }
    let mut text = PLAN_HEADER.join(",");
    for row in plan_rows(&p) {
        text.push('\n');
        text.push_str(&row.join(","));
    }
    Ok(text)
}

/// Executes one command; returns the text to print on success.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Generate(args) => generate(&args),
        Command::Analyze(Analyze::Plan(args)) => run_plan(&args),
        Command::Analyze(Analyze::Dmd(args)) => {
            let cfg = RunConfig::from_args(args.resolve()?)?;
            let report = pipeline::run_dmd(&cfg)?;
            Ok(format!(
                "dmd rank {}: {}",
                report.rank.unwrap_or(0),
                describe(report.dominant_mode.as_ref())
            ))
        }
        Command::Analyze(Analyze::Mrdmd(args)) => {
            let cfg = RunConfig::from_args(args.resolve()?)?;
            let report = pipeline::run_mrdmd(&cfg)?;
            let levels = report.plan.as_ref().map_or(0, |p| p.levels);
            Ok(format!(
                "mrdmd {levels} levels: {}",
                describe(report.dominant_mode.as_ref())
            ))
        }
        Command::Analyze(Analyze::Compare(args)) => {
            let cfg = RunConfig::from_args(args.resolve()?)?;
            let c = pipeline::run_compare(&cfg)?;
            Ok(format!(
                "dmd: {}\nmrdmd: {}",
                describe(c.dmd.dominant_mode.as_ref()),
                describe(c.mrdmd.dominant_mode.as_ref())
            ))
        }
    }
}
