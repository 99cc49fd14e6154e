//! Option parsing and validation.
//!
//! Every analysis option can come from the command line, from an
//! `MRDMD_*` environment variable, or from a TOML file passed with
//! `--config` whose keys are the long flag names. Precedence is
//! command line, then environment, then file, then built-in default.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use mrdmd::dmd::TruncationRule;
use mrdmd::ingest::FillPolicy;
use mrdmd::modes::DEFAULT_EPS_CRIT;
use mrdmd::siggen::Profile;
use serde::Deserialize;

use crate::error::{CliError, Result};

pub const DEFAULT_MU: usize = 16;
pub const DEFAULT_G: f64 = 4.0;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_OUT: &str = "mrdmd-out";

/// Output files that can be switched on or off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Emit {
    /// report.json
    Report,
    /// eigenvalues.csv and modes.csv
    Eigenvalues,
    /// reconstruction.csv
    Reconstruction,
    /// level_<l>.csv
    Levels,
    /// plan.csv
    Plan,
}

impl Emit {
    pub const ALL: [Emit; 5] = [
        Emit::Report,
        Emit::Eigenvalues,
        Emit::Reconstruction,
        Emit::Levels,
        Emit::Plan,
    ];
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct AnalyzeArgs {
    /// TOML file supplying defaults for any option below (keys = long flag names).
    #[arg(long, env = "MRDMD_CONFIG")]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// CSV file with one column per channel.
    #[arg(long, env = "MRDMD_INPUT")]
    pub input: Option<PathBuf>,

    /// Built-in synthetic signal instead of an input file (lfo_udc, ac_in).
    #[arg(long, env = "MRDMD_PROFILE")]
    pub profile: Option<String>,

    /// Noise seed for --profile [default: 1].
    #[arg(long, env = "MRDMD_SEED")]
    pub seed: Option<u64>,

    /// Override the profile's noise standard deviation.
    #[arg(long, env = "MRDMD_NOISE_STD")]
    pub noise_std: Option<f64>,

    /// Channel to analyse [default: first channel].
    #[arg(long, env = "MRDMD_CHANNEL")]
    pub channel: Option<String>,

    /// Sample interval in seconds (required unless --time-column).
    #[arg(long, env = "MRDMD_DT")]
    pub dt: Option<f64>,

    /// First input column holds sample times.
    #[arg(long, env = "MRDMD_TIME_COLUMN", num_args = 0..=1, default_missing_value = "true")]
    pub time_column: Option<bool>,

    /// Input file has no header row.
    #[arg(long, env = "MRDMD_NO_HEADER", num_args = 0..=1, default_missing_value = "true")]
    pub no_header: Option<bool>,

    /// Replacement for missing samples: zero or hold-last [default: zero].
    #[arg(long, env = "MRDMD_FILL")]
    pub fill: Option<String>,

    /// First sample of an artificial gap.
    #[arg(long, env = "MRDMD_GAP_START")]
    pub gap_start: Option<usize>,

    /// Length of the artificial gap in samples [default: 0].
    #[arg(long, env = "MRDMD_GAP_LENGTH")]
    pub gap_length: Option<usize>,

    /// Delay-embedding depth [default: samples / 5].
    #[arg(long, env = "MRDMD_STACK")]
    pub stack: Option<usize>,

    /// Snapshot columns analysed [default: embedded columns - 1].
    #[arg(long, env = "MRDMD_COLUMNS")]
    pub columns: Option<usize>,

    /// Keep exactly this many singular values.
    #[arg(long, env = "MRDMD_RANK")]
    pub rank: Option<usize>,

    /// Keep singular values up to this cumulative energy fraction [default: 0.9999].
    #[arg(long, env = "MRDMD_ENERGY")]
    pub energy: Option<f64>,

    /// Keep singular values with sigma_k / sigma_1 at or above this ratio.
    #[arg(long, env = "MRDMD_SV_RATIO")]
    pub sv_ratio: Option<f64>,

    /// Subsamples per MR-DMD bin [default: 16].
    #[arg(long, env = "MRDMD_MU")]
    pub mu: Option<usize>,

    /// Slow-mode divisor; the screening radius is pi / g [default: 4].
    #[arg(long, env = "MRDMD_G")]
    pub g: Option<f64>,

    /// Deepest MR-DMD level [default: deepest admissible].
    #[arg(long, env = "MRDMD_TERMINATION_LEVEL")]
    pub termination_level: Option<usize>,

    /// Growth rates within +/- this band (1/s) count as critical [default: 0.5].
    #[arg(long, env = "MRDMD_EPS_CRIT")]
    pub eps_crit: Option<f64>,

    /// Output directory [default: mrdmd-out].
    #[arg(long, short = 'o', env = "MRDMD_OUT")]
    pub out: Option<PathBuf>,

    /// Comma-separated outputs to write [default: all].
    #[arg(long, env = "MRDMD_EMIT", value_delimiter = ',')]
    pub emit: Option<Vec<Emit>>,

    /// Worker threads for sibling MR-DMD bins; results do not depend on it [default: 1].
    #[arg(long, env = "MRDMD_THREADS")]
    pub threads: Option<usize>,
}

macro_rules! merge_fields {
    ($a:ident, $b:ident; $($f:ident),*) => {
        AnalyzeArgs { config: $a.config, $($f: $a.$f.or($b.$f)),* }
    };
}

impl AnalyzeArgs {
    /// Fills unset options from `file`.
    pub fn merged_with(self, file: AnalyzeArgs) -> AnalyzeArgs {
        let a = self;
        let b = file;
        merge_fields!(a, b; input, profile, seed, noise_std, channel, dt, time_column, no_header, fill,
            gap_start, gap_length, stack, columns, rank, energy, sv_ratio, mu, g, termination_level,
            eps_crit, out, emit, threads)
    }

    /// Applies the `--config` file, if any.
    pub fn resolve(self) -> Result<AnalyzeArgs> {
        match self.config.clone() {
            Some(path) => {
                let file = load_config_file(&path)?;
                Ok(self.merged_with(file))
            }
            None => Ok(self),
        }
    }
}

pub fn load_config_file(path: &Path) -> Result<AnalyzeArgs> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::ConfigFile {
        path: path.to_path_buf(),
        message: e.message().to_string(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    File(PathBuf),
    Profile { profile: Profile, seed: u64 },
}

/// Validated settings for one analysis run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: Source,
    pub channel: Option<String>,
    pub dt: Option<f64>,
    pub time_column: bool,
    pub has_header: bool,
    pub fill: FillPolicy,
    /// `(start, length)`; `None` when no gap is injected.
    pub gap: Option<(usize, usize)>,
    pub stack: Option<usize>,
    pub columns: Option<usize>,
    pub rule: TruncationRule,
    pub mu: usize,
    pub g: f64,
    pub termination_level: Option<usize>,
    pub eps_crit: f64,
    pub out_dir: PathBuf,
    pub emit: Vec<Emit>,
    pub threads: usize,
}

impl RunConfig {
    pub fn emits(&self, e: Emit) -> bool {
        self.emit.contains(&e)
    }

    /// Validates resolved options. No data is read.
    pub fn from_args(args: AnalyzeArgs) -> Result<RunConfig> {
        let source = match (args.input, args.profile) {
            (Some(path), None) => Source::File(path),
            (None, Some(name)) => {
                let mut profile = Profile::from_str(&name)?;
                if let Some(s) = args.noise_std {
                    profile.noise_std = s;
                }
                Source::Profile {
                    profile,
                    seed: args.seed.unwrap_or(DEFAULT_SEED),
                }
            }
            (Some(_), Some(_)) => return Err(CliError::Config("--input and --profile are mutually exclusive".into())),
            (None, None) => return Err(CliError::Config("one of --input or --profile is required".into())),
        };
        if matches!(source, Source::File(_)) && (args.seed.is_some() || args.noise_std.is_some()) {
            return Err(CliError::Config(
                "--seed and --noise-std apply only to --profile".into(),
            ));
        }

        let rule = match (args.rank, args.energy, args.sv_ratio) {
            (None, None, None) => TruncationRule::default(),
            (Some(r), None, None) => TruncationRule::FixedRank(r),
            (None, Some(e), None) => TruncationRule::EnergyFraction(e),
            (None, None, Some(t)) => TruncationRule::SingularValueRatio(t),
            _ => {
                return Err(CliError::Config(
                    "at most one of --rank, --energy, --sv-ratio may be given".into(),
                ))
            }
        };
        rule.validate()?;

        let mu = args.mu.unwrap_or(DEFAULT_MU);
        if mu < 2 {
            return Err(CliError::Config(format!("--mu must be at least 2, got {mu}")));
        }
        let g = args.g.unwrap_or(DEFAULT_G);
        if !(g.is_finite() && g > 1.0) {
            return Err(CliError::Config(format!("--g must exceed 1, got {g}")));
        }
        let eps_crit = args.eps_crit.unwrap_or(DEFAULT_EPS_CRIT);
        if !(eps_crit.is_finite() && eps_crit >= 0.0) {
            return Err(CliError::Config(format!(
                "--eps-crit must be non-negative, got {eps_crit}"
            )));
        }
        if let Some(dt) = args.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(CliError::Config(format!("--dt must be positive, got {dt}")));
            }
        }
        if args.stack == Some(0) {
            return Err(CliError::Config("--stack must be at least 1".into()));
        }
        if matches!(args.columns, Some(c) if c < 2) {
            return Err(CliError::Config("--columns must be at least 2".into()));
        }
        if args.termination_level == Some(0) {
            return Err(CliError::Config("--termination-level must be at least 1".into()));
        }
        let threads = args.threads.unwrap_or(1);
        if threads == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        let fill = match args.fill {
            Some(f) => f.parse()?,
            None => FillPolicy::default(),
        };
        let gap = match (args.gap_start, args.gap_length) {
            (_, None | Some(0)) => None,
            (Some(s), Some(l)) => Some((s, l)),
            (None, Some(_)) => return Err(CliError::Config("--gap-length needs --gap-start".into())),
        };
        let mut emit = args.emit.unwrap_or_else(|| Emit::ALL.to_vec());
        emit.sort_by_key(|e| *e as u8);
        emit.dedup();

        Ok(RunConfig {
            source,
            channel: args.channel,
            dt: args.dt,
            time_column: args.time_column.unwrap_or(false),
            has_header: !args.no_header.unwrap_or(false),
            fill,
            gap,
            stack: args.stack,
            columns: args.columns,
            rule,
            mu,
            g,
            termination_level: args.termination_level,
            eps_crit,
            out_dir: args.out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            emit,
            threads,
        })
    }
}
