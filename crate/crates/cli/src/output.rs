//! CSV and JSON artifacts.
//!
//! CSV files are comma separated with one header row; reals are written in
//! scientific notation with 17 significant digits so reruns are byte
//! identical. JSON uses the shortest representation that round-trips.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use mrdmd::dmd::{DmdResult, TruncationRule};
use mrdmd::modes::{integral_contribution, DampingClass, ModeReport, Verdict};
use mrdmd::mrdmd::{q, MrdmdPlan, MrdmdResult};
use serde::Serialize;

use crate::error::{CliError, Result};

/// Fixed 17-significant-digit scientific format.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

/// Writes `header` and `rows` (already formatted cells) as CSV.
pub fn write_table<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = create(path)?;
    let io = |e| CliError::io(path, e);
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for row in rows {
        writeln!(w, "{}", row.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| CliError::io(path, e);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(path, e.into()))?;
    writeln!(w).map_err(io)?;
    w.flush().map_err(io)
}

pub const EIGENVALUE_HEADER: [&str; 13] = [
    "level",
    "bin",
    "index",
    "lambda_re",
    "lambda_im",
    "omega_re",
    "omega_im",
    "frequency_hz",
    "growth_rate",
    "damping_class",
    "amplitude_mag",
    "integral_contribution",
    "slow",
];

/// One row per eigenvalue (conjugates included), for eigenvalue-plane plots.
pub fn eigenvalue_rows(
    dmd: &DmdResult,
    f_sp: f64,
    horizon: usize,
    level: usize,
    bin: usize,
    slow: Option<&[usize]>,
    eps_crit: f64,
) -> Vec<Vec<String>> {
    dmd.eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, l)| l.norm() > 0.0)
        .map(|(k, &lambda)| {
            let omega = lambda.ln() * f_sp;
            let b = dmd.amplitudes[k];
            let is_slow = slow.is_none_or(|s| s.contains(&k));
            vec![
                level.to_string(),
                bin.to_string(),
                k.to_string(),
                fmt_f(lambda.re),
                fmt_f(lambda.im),
                fmt_f(omega.re),
                fmt_f(omega.im),
                fmt_f(omega.im.abs() / (2.0 * std::f64::consts::PI)),
                fmt_f(omega.re),
                DampingClass::from_growth_rate(omega.re, eps_crit).as_str().to_string(),
                fmt_f(b.norm()),
                fmt_f(integral_contribution(dmd.modes.col(k), lambda, b, horizon)),
                u8::from(is_slow).to_string(),
            ]
        })
        .collect()
}

pub const MODE_HEADER: [&str; 15] = [
    "rank",
    "level",
    "bin",
    "index",
    "frequency_hz",
    "growth_rate",
    "damping_class",
    "lambda_re",
    "lambda_im",
    "omega_re",
    "omega_im",
    "amplitude_mag",
    "integral_contribution",
    "pair",
    "slow",
];

pub fn mode_rows(reports: &[ModeReport]) -> impl Iterator<Item = Vec<String>> + '_ {
    reports.iter().map(|m| {
        vec![
            m.dominant_rank.to_string(),
            m.level.to_string(),
            m.bin.to_string(),
            m.index.to_string(),
            fmt_f(m.frequency_hz),
            fmt_f(m.growth_rate),
            m.damping_class.as_str().to_string(),
            fmt_f(m.lambda.re),
            fmt_f(m.lambda.im),
            fmt_f(m.omega.re),
            fmt_f(m.omega.im),
            fmt_f(m.amplitude_mag),
            fmt_f(m.integral_contribution),
            u8::from(m.pair).to_string(),
            u8::from(m.slow).to_string(),
        ]
    })
}

pub const PLAN_HEADER: [&str; 8] = [
    "level",
    "bins",
    "bin_size",
    "min_bin_size",
    "bin_duration",
    "f_sp",
    "f_m",
    "f_slow_max",
];

pub fn plan_rows(plan: &MrdmdPlan) -> impl Iterator<Item = Vec<String>> + '_ {
    plan.per_level.iter().map(|l| {
        vec![
            l.level.to_string(),
            l.bins.to_string(),
            fmt_f(q(l.bin_size)),
            l.min_bin_size.to_string(),
            fmt_f(q(l.bin_duration)),
            fmt_f(q(l.f_sp)),
            fmt_f(q(l.f_m)),
            fmt_f(q(l.f_slow_max)),
        ]
    })
}

/// Where the analysed samples came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceInfo {
    /// `file` or `profile`.
    pub kind: String,
    /// File path or profile name.
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelInfo {
    pub level: usize,
    pub bins: usize,
    pub bin_size: f64,
    pub min_bin_size: usize,
    pub bin_duration: f64,
    pub f_sp: f64,
    pub f_m: f64,
    pub f_slow_max: f64,
    /// `f_m` as an exact fraction, e.g. `"125/8"`.
    pub f_m_exact: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanInfo {
    pub mu: usize,
    pub levels: usize,
    pub g: f64,
    pub rho: f64,
    pub n: usize,
    pub dt: f64,
    pub duration: f64,
    pub per_level: Vec<LevelInfo>,
}

impl From<&MrdmdPlan> for PlanInfo {
    fn from(p: &MrdmdPlan) -> Self {
        PlanInfo {
            mu: p.mu,
            levels: p.levels,
            g: q(p.g),
            rho: p.rho,
            n: p.n,
            dt: q(p.dt),
            duration: q(p.duration),
            per_level: p
                .per_level
                .iter()
                .map(|l| LevelInfo {
                    level: l.level,
                    bins: l.bins,
                    bin_size: q(l.bin_size),
                    min_bin_size: l.min_bin_size,
                    bin_duration: q(l.bin_duration),
                    f_sp: q(l.f_sp),
                    f_m: q(l.f_m),
                    f_slow_max: q(l.f_slow_max),
                    f_m_exact: l.f_m.to_string(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeInfo {
    pub level: usize,
    pub bin: usize,
    pub start: usize,
    pub end: usize,
    pub f_sp: f64,
    pub rank: usize,
    pub slow_modes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

pub fn node_infos(res: &MrdmdResult) -> Vec<NodeInfo> {
    res.nodes()
        .map(|n| NodeInfo {
            level: n.level,
            bin: n.bin_index,
            start: n.span.start,
            end: n.span.end,
            f_sp: n.f_sp,
            rank: n.dmd.as_ref().map_or(0, |d| d.rank()),
            slow_modes: n.slow_set.len(),
            failure: n.failure.clone(),
        })
        .collect()
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    /// `dmd` or `mrdmd`.
    pub method: String,
    pub source: SourceInfo,
    pub channel: String,
    pub samples: usize,
    pub dt: f64,
    pub missing_samples: usize,
    pub stack_depth: usize,
    pub rows: usize,
    pub columns: usize,
    pub truncation: TruncationRule,
    pub eps_crit: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_clamped: Option<bool>,
    /// Oscillatory mode with the largest integral contribution.
    pub dominant_mode: Option<ModeReport>,
    pub verdict: Verdict,
    /// Leading-row reconstruction error over observed samples.
    pub reconstruction_rmse: Option<f64>,
    pub signal_rms: Option<f64>,
    pub modes: Vec<ModeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<NodeInfo>>,
}

/// One method's side of `compare.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub identified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub dominant_mode: Option<ModeReport>,
    pub frequency_error_hz: Option<f64>,
    pub growth_rate_error: Option<f64>,
    pub reconstruction_rmse: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Truth {
    pub frequency_hz: f64,
    pub growth_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapInfo {
    pub start: usize,
    pub length: usize,
}

/// Contents of `compare.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub source: SourceInfo,
    pub truth: Option<Truth>,
    pub gap: Option<GapInfo>,
    pub dmd: MethodSummary,
    pub mrdmd: MethodSummary,
    /// DMD reconstruction RMSE divided by MR-DMD's.
    pub rmse_ratio: Option<f64>,
    /// `|growth-rate error|` strictly smaller under MR-DMD.
    pub mrdmd_damping_more_accurate: Option<bool>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f(-170.0), "-1.7000000000000000e2");
        let x = 8.6_f64;
        assert_eq!(fmt_f(x).parse::<f64>().unwrap(), x);
    }
}
