//! Continuous-time mode parameters, integral contribution, and ranking.

use std::cmp::Ordering;
use std::f64::consts::PI;

use faer::ColRef;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dmd::{conjugate_partners, DmdResult};
use crate::error::{Error, Result};

/// Default half-width (1/s) of the band of growth rates counted as critical.
pub const DEFAULT_EPS_CRIT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DampingClass {
    Decaying,
    Critical,
    Growing,
}

impl DampingClass {
    pub fn from_growth_rate(growth_rate: f64, eps_crit: f64) -> Self {
        if growth_rate.abs() <= eps_crit {
            DampingClass::Critical
        } else if growth_rate > 0.0 {
            DampingClass::Growing
        } else {
            DampingClass::Decaying
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DampingClass::Decaying => "decaying",
            DampingClass::Critical => "critical",
            DampingClass::Growing => "growing",
        }
    }
}

/// One identified mode. Conjugate pairs are collapsed to the member with
/// non-negative imaginary part and flagged with `pair`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    /// Decomposition level (1 for single-window DMD).
    pub level: usize,
    pub bin: usize,
    /// Column of the mode in its node's [`DmdResult`].
    pub index: usize,
    /// Discrete eigenvalue at the analysed step.
    pub lambda: C64,
    /// Continuous eigenvalue, rad/s.
    pub omega: C64,
    pub frequency_hz: f64,
    /// `Re ω`, 1/s.
    pub growth_rate: f64,
    pub damping_class: DampingClass,
    pub amplitude_mag: f64,
    pub integral_contribution: f64,
    /// 1 = largest integral contribution.
    pub dominant_rank: usize,
    pub pair: bool,
    /// Passed slow-mode screening (always true for single-window DMD).
    pub slow: bool,
}

/// `ω = f_sp · ln λ` (principal branch).
pub fn to_continuous(lambda: C64, f_sp: f64) -> Result<C64> {
    if lambda == C64::new(0.0, 0.0) {
        return Err(Error::ZeroEigenvalue);
    }
    Ok(lambda.ln() * f_sp)
}

/// `‖Φ_k‖ · Σ_{j=1}^{horizon} |b_k| |λ_k|^{j-1}`: the discrete integral of
/// the mode's envelope over the analysis horizon.
pub fn integral_contribution(phi: ColRef<'_, C64>, lambda: C64, b: C64, horizon_steps: usize) -> f64 {
    let rho = lambda.norm();
    let mut envelope = 0.0;
    let mut p = 1.0;
    for _ in 0..horizon_steps {
        envelope += p;
        p *= rho;
    }
    phi.norm_l2() * b.norm() * envelope
}

/// Reports for every mode of `dmd`, with conjugate pairs collapsed.
///
/// `f_sp` is the rate (Hz) at which the eigenvalues were sampled and
/// `horizon` the number of steps the integral contribution runs over.
/// Modes with `λ = 0` have no continuous counterpart and are skipped.
/// `slow` lists the modes that passed screening; `None` marks all as slow.
pub fn mode_reports(
    dmd: &DmdResult,
    f_sp: f64,
    horizon: usize,
    level: usize,
    bin: usize,
    slow: Option<&[usize]>,
    eps_crit: f64,
) -> Vec<ModeReport> {
    let partners = conjugate_partners(&dmd.eigenvalues);
    let mut out = Vec::new();
    for (k, &lambda) in dmd.eigenvalues.iter().enumerate() {
        if lambda.im < 0.0 && partners[k].is_some() {
            continue;
        }
        let Ok(omega) = to_continuous(lambda, f_sp) else {
            continue;
        };
        let b = dmd.amplitudes[k];
        out.push(ModeReport {
            level,
            bin,
            index: k,
            lambda,
            omega,
            frequency_hz: omega.im.abs() / (2.0 * PI),
            growth_rate: omega.re,
            damping_class: DampingClass::from_growth_rate(omega.re, eps_crit),
            amplitude_mag: b.norm(),
            integral_contribution: integral_contribution(dmd.modes.col(k), lambda, b, horizon),
            dominant_rank: 0,
            pair: partners[k].is_some(),
            slow: slow.is_none_or(|s| s.contains(&k)),
        });
    }
    out
}

fn rank_order(a: &ModeReport, b: &ModeReport) -> Ordering {
    b.integral_contribution
        .total_cmp(&a.integral_contribution)
        .then(a.frequency_hz.total_cmp(&b.frequency_hz))
        .then(a.level.cmp(&b.level))
        .then(a.bin.cmp(&b.bin))
        .then(a.index.cmp(&b.index))
}

/// Assigns damping classes and `dominant_rank` (descending integral
/// contribution; ties by ascending frequency, then level). The list is
/// left sorted by rank.
pub fn classify(reports: &mut [ModeReport], eps_crit: f64) {
    for r in reports.iter_mut() {
        r.damping_class = DampingClass::from_growth_rate(r.growth_rate, eps_crit);
    }
    reports.sort_by(rank_order);
    for (i, r) in reports.iter_mut().enumerate() {
        r.dominant_rank = i + 1;
    }
}

/// The oscillatory mode (conjugate pair) with the largest integral
/// contribution. Non-oscillatory modes such as the DC offset are not
/// candidates.
pub fn dominant_oscillation(reports: &[ModeReport]) -> Option<&ModeReport> {
    reports.iter().filter(|r| r.pair).min_by(|a, b| rank_order(a, b))
}

/// Stability verdict from the dominant oscillation's damping class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Stable,
    /// Sustained oscillation at critical damping.
    Marginal,
    Unstable,
    /// No oscillatory mode was identified.
    Undetermined,
}

pub fn verdict(dominant: Option<&ModeReport>) -> Verdict {
    match dominant.map(|d| d.damping_class) {
        Some(DampingClass::Decaying) => Verdict::Stable,
        Some(DampingClass::Critical) => Verdict::Marginal,
        Some(DampingClass::Growing) => Verdict::Unstable,
        None => Verdict::Undetermined,
    }
}
