//! Multi-resolution DMD.
//!
//! The snapshot window is analysed level by level. At level `l` it is split
//! into `2^(l-1)` dyadic bins; each bin is subsampled to `μ` columns and
//! decomposed with DMD. Modes with `|ln λ| < ρ` ("slow" at that level's
//! subsample rate) are reconstructed at full resolution and subtracted, and
//! the residual of each bin is halved and handed to the next level.
//!
//! Level parameters follow from the window alone:
//!
//! ```text
//! B    = 2^(l-1)          bins per level
//! S    = n / B            columns per bin
//! D    = S Δt             bin duration
//! f_sp = μ / D            subsample rate
//! f_m  = f_sp / 2 = 2^(l-2) μ / N
//! f_slow = f_m / g,  ρ = π / g
//! ```
//!
//! and the deepest level `L` is the largest with `⌊n / 2^(L-1)⌋ > μ`.

use std::f64::consts::PI;
use std::ops::Range;

use faer::{Mat, MatMut, MatRef};
use num_rational::Ratio;
use num_traits::ToPrimitive;

use crate::dmd::{dmd_reducing_rank, DmdResult, TruncationRule};
use crate::error::{Error, Result};
use crate::modes::{classify, mode_reports, ModeReport};
use crate::stacking::SnapshotMatrix;

/// Exact rational used by the planner.
pub type Rational = Ratio<i128>;

fn to_rational(x: f64, what: &str) -> Result<Rational> {
    Rational::approximate_float(x)
        .filter(|r| r.to_f64().is_some_and(|v| (v - x).abs() <= 1e-15 * x.abs()))
        .ok_or_else(|| Error::InvalidPlan(format!("{what} = {x} has no exact rational form")))
}

fn pow2(e: usize) -> Result<i128> {
    1i128
        .checked_shl(e as u32)
        .filter(|&v| v > 0)
        .ok_or_else(|| Error::InvalidPlan("too many levels".into()))
}

/// Parameters of one decomposition level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelPlan {
    pub level: usize,
    /// `B = 2^(l-1)`.
    pub bins: usize,
    /// Nominal `S = n / B` (columns).
    pub bin_size: Rational,
    /// Smallest actual bin, `⌊n / B⌋`.
    pub min_bin_size: usize,
    /// `D = S Δt` (s).
    pub bin_duration: Rational,
    /// `f_sp = μ / D` (Hz).
    pub f_sp: Rational,
    /// `f_m = f_sp / 2` (Hz).
    pub f_m: Rational,
    /// `f_m / g` (Hz).
    pub f_slow_max: Rational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MrdmdPlan {
    pub mu: usize,
    /// Termination level `L`.
    pub levels: usize,
    pub g: Rational,
    /// Screening threshold `π / g` (radians).
    pub rho: f64,
    /// Snapshot columns analysed.
    pub n: usize,
    pub dt: Rational,
    /// Window duration `N = n Δt`.
    pub duration: Rational,
    pub per_level: Vec<LevelPlan>,
}

impl MrdmdPlan {
    pub fn dt_f64(&self) -> f64 {
        self.dt.to_f64().unwrap_or(f64::NAN)
    }

    pub fn level(&self, l: usize) -> &LevelPlan {
        &self.per_level[l - 1]
    }

    /// Deepest level allowed by `⌊n / 2^(L-1)⌋ > μ`.
    pub fn max_levels(n: usize, mu: usize) -> usize {
        let mut l = 0;
        while l < usize::BITS as usize && (n >> l) > mu {
            l += 1;
        }
        l
    }
}

/// Builds the level table for `n` snapshot columns sampled every `dt`
/// seconds, `μ` subsamples per bin, and screening divisor `g`.
pub fn plan(n: usize, dt: f64, mu: usize, g: f64, levels_override: Option<usize>) -> Result<MrdmdPlan> {
    if n < 2 {
        return Err(Error::InvalidPlan(format!("need at least 2 snapshot columns, got {n}")));
    }
    if mu < 2 {
        return Err(Error::InvalidPlan(format!(
            "subsample count must be at least 2, got {mu}"
        )));
    }
    if mu >= n {
        return Err(Error::InvalidPlan(format!(
            "cannot subsample level 1: subsample count {mu} must be smaller than the {n} snapshot columns (n / 2^(L-1) > mu)"
        )));
    }
    if !(g.is_finite() && g > 1.0) {
        return Err(Error::InvalidPlan(format!(
            "screening divisor g must exceed 1, got {g}"
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidPlan(format!("dt must be positive, got {dt}")));
    }
    let max = MrdmdPlan::max_levels(n, mu);
    let levels = match levels_override {
        Some(l) if l == 0 || l > max => {
            return Err(Error::InvalidPlan(format!(
                "termination level {l} violates n / 2^(L-1) > mu (n = {n}, mu = {mu}, largest admissible L = {max})"
            )))
        }
        Some(l) => l,
        None => max,
    };
    let dt_q = to_rational(dt, "dt")?;
    let g_q = to_rational(g, "g")?;
    let n_q = Rational::from_integer(n as i128);
    let mu_q = Rational::from_integer(mu as i128);
    let duration = n_q * dt_q;
    let per_level = (1..=levels)
        .map(|l| {
            let b = pow2(l - 1)?;
            let bin_size = n_q / b;
            let bin_duration = bin_size * dt_q;
            let f_sp = mu_q / bin_duration;
            let f_m = f_sp / 2;
            Ok(LevelPlan {
                level: l,
                bins: b as usize,
                bin_size,
                min_bin_size: n >> (l - 1),
                bin_duration,
                f_sp,
                f_m,
                f_slow_max: f_m / g_q,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MrdmdPlan {
        mu,
        levels,
        g: g_q,
        rho: PI / g,
        n,
        dt: dt_q,
        duration,
        per_level,
    })
}

/// `μ` evenly spaced column indices `start + round(i·len/μ)`, `i = 0..μ`.
pub fn subsample(span: Range<usize>, mu: usize) -> Result<Vec<usize>> {
    let len = span.len();
    if mu == 0 || len < mu {
        return Err(Error::SpanTooShort { len, mu });
    }
    // round half up in integer arithmetic
    Ok((0..mu).map(|i| span.start + (2 * i * len + mu) / (2 * mu)).collect())
}

/// Indices of modes with `|ln λ| < ρ`. A zero eigenvalue is never slow.
pub fn screen_slow(dmd: &DmdResult, rho: f64) -> Vec<usize> {
    dmd.eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, l)| l.norm() > 0.0 && l.ln().norm() < rho)
        .map(|(k, _)| k)
        .collect()
}

/// Slow-mode approximation at full resolution over `len` columns spaced `dt`:
/// column `j` is `Re Σ_{k∈slow} Φ_k exp(ω_k j dt) b_k` with `ω_k = f_sp ln λ_k`.
pub fn slow_reconstruction(dmd: &DmdResult, slow: &[usize], len: usize, dt: f64, f_sp: f64) -> Mat<f64> {
    let m = dmd.modes.nrows();
    if slow.is_empty() {
        return Mat::zeros(m, len);
    }
    let s = slow.len();
    let mut c_re = Mat::<f64>::zeros(s, len);
    let mut c_im = Mat::<f64>::zeros(s, len);
    for (row, &k) in slow.iter().enumerate() {
        let omega = dmd.eigenvalues[k].ln() * f_sp;
        let b = dmd.amplitudes[k];
        for j in 0..len {
            let c = b * (omega * (j as f64 * dt)).exp();
            c_re[(row, j)] = c.re;
            c_im[(row, j)] = c.im;
        }
    }
    let phi_re = Mat::from_fn(m, s, |i, r| dmd.modes[(i, slow[r])].re);
    let phi_im = Mat::from_fn(m, s, |i, r| dmd.modes[(i, slow[r])].im);
    &phi_re * &c_re - &phi_im * &c_im
}

/// One (level, bin) analysis unit.
#[derive(Debug, Clone)]
pub struct MrdmdNode {
    pub level: usize,
    pub bin_index: usize,
    /// Snapshot columns covered, relative to the analysed window.
    pub span: Range<usize>,
    pub subsample_indices: Vec<usize>,
    /// Subsample rate of this bin, `μ / (len Δt)` (Hz).
    pub f_sp: f64,
    /// `None` if the bin held no signal energy or its DMD failed.
    pub dmd: Option<DmdResult>,
    pub failure: Option<String>,
    pub slow_set: Vec<usize>,
    /// Empty at the termination level, otherwise the two halves of `span`.
    pub children: Vec<MrdmdNode>,
}

impl MrdmdNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// This node followed by its descendants, depth first.
    pub fn iter(&self) -> impl Iterator<Item = &MrdmdNode> {
        let mut stack = vec![self];
        std::iter::from_fn(move || {
            let node = stack.pop()?;
            stack.extend(node.children.iter().rev());
            Some(node)
        })
    }

    /// Nyquist frequency of this bin's subsampling.
    pub fn f_m(&self) -> f64 {
        self.f_sp / 2.0
    }

    /// Reports for every mode of this node (slow or not).
    pub fn mode_reports(&self, mu: usize, eps_crit: f64) -> Vec<ModeReport> {
        match &self.dmd {
            Some(d) => mode_reports(
                d,
                self.f_sp,
                mu,
                self.level,
                self.bin_index,
                Some(&self.slow_set),
                eps_crit,
            ),
            None => Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MrdmdResult {
    pub plan: MrdmdPlan,
    pub root: MrdmdNode,
    /// One `m × n` matrix per level: that level's slow approximations, bin by bin.
    pub per_level_reconstruction: Vec<Mat<f64>>,
    /// Sum of all levels.
    pub total_reconstruction: Mat<f64>,
    /// Slow modes of every node, ranked by integral contribution.
    pub all_modes: Vec<ModeReport>,
}

impl MrdmdResult {
    pub fn nodes(&self) -> impl Iterator<Item = &MrdmdNode> {
        self.root.iter()
    }

    /// The node's slow approximation, i.e. its span of its level's matrix.
    pub fn node_reconstruction(&self, node: &MrdmdNode) -> MatRef<'_, f64> {
        self.per_level_reconstruction[node.level - 1]
            .as_ref()
            .subcols(node.span.start, node.span.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecomposeOptions {
    pub rule: TruncationRule,
    pub eps_crit: f64,
    /// Analyse sibling bins concurrently. Results are identical either way.
    pub parallel: bool,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self {
            rule: TruncationRule::default(),
            eps_crit: crate::modes::DEFAULT_EPS_CRIT,
            parallel: false,
        }
    }
}

struct Ctx<'a> {
    plan: &'a MrdmdPlan,
    dt: f64,
    rule: TruncationRule,
    parallel: bool,
}

/// Runs the full recursion over the `plan.n` columns of `x`.
pub fn decompose(x: &SnapshotMatrix, plan: &MrdmdPlan, options: &DecomposeOptions) -> Result<MrdmdResult> {
    options.rule.validate()?;
    if x.ncols() != plan.n {
        return Err(Error::ShapeMismatch(format!(
            "snapshot matrix has {} columns, plan expects {}",
            x.ncols(),
            plan.n
        )));
    }
    let (m, n) = (x.nrows(), x.ncols());
    let ctx = Ctx {
        plan,
        dt: plan.dt_f64(),
        rule: options.rule,
        parallel: options.parallel,
    };
    let mut per_level: Vec<Mat<f64>> = (0..plan.levels).map(|_| Mat::zeros(m, n)).collect();
    let root = {
        let views: Vec<MatMut<'_, f64>> = per_level.iter_mut().map(|p| p.as_mut()).collect();
        analyze_bin(&ctx, x.data().as_ref(), 0..n, 1, 0, views)
    };

    let mut total = Mat::<f64>::zeros(m, n);
    for p in &per_level {
        total += p;
    }

    let mut all_modes: Vec<ModeReport> = root
        .iter()
        .flat_map(|node| node.mode_reports(plan.mu, options.eps_crit))
        .filter(|r| r.slow)
        .collect();
    classify(&mut all_modes, options.eps_crit);

    Ok(MrdmdResult {
        plan: plan.clone(),
        root,
        per_level_reconstruction: per_level,
        total_reconstruction: total,
        all_modes,
    })
}

/// `input` holds the bin's residual columns; `out[0]` is this level's
/// output restricted to the bin, `out[1..]` the deeper levels'.
fn analyze_bin(
    ctx: &Ctx<'_>,
    input: MatRef<'_, f64>,
    span: Range<usize>,
    level: usize,
    bin_index: usize,
    mut out: Vec<MatMut<'_, f64>>,
) -> MrdmdNode {
    let len = span.len();
    let mu = ctx.plan.mu;
    let subsample_indices = subsample(span.clone(), mu).expect("plan guarantees bins longer than mu");
    let f_sp = mu as f64 / (len as f64 * ctx.dt);

    let local: Vec<usize> = subsample_indices.iter().map(|i| i - span.start).collect();
    let sub = Mat::from_fn(input.nrows(), mu, |i, j| input[(i, local[j])]);
    let (x1, x2) = (sub.as_ref().subcols(0, mu - 1), sub.as_ref().subcols(1, mu - 1));

    let (dmd, failure) = match dmd_reducing_rank(x1, x2, &ctx.rule, 1.0 / f_sp) {
        Ok(d) => (Some(d), None),
        Err(Error::NoSignalEnergy) => (None, None),
        Err(e) => (None, Some(e.to_string())),
    };
    let slow_set = dmd.as_ref().map(|d| screen_slow(d, ctx.plan.rho)).unwrap_or_default();

    let mut rest = out.split_off(1);
    let mut here = out.pop().expect("one output view per level");
    let residual = match &dmd {
        Some(d) if !slow_set.is_empty() => {
            let rec = slow_reconstruction(d, &slow_set, len, ctx.dt, f_sp);
            here.copy_from(&rec);
            input - &rec
        }
        _ => input.to_owned(),
    };

    let mut children = Vec::new();
    if level < ctx.plan.levels {
        let half = len.div_ceil(2);
        let (mut left_out, mut right_out) = (Vec::with_capacity(rest.len()), Vec::with_capacity(rest.len()));
        for view in rest.drain(..) {
            let (l, r) = view.split_at_col_mut(half);
            left_out.push(l);
            right_out.push(r);
        }
        let left_in = residual.as_ref().subcols(0, half);
        let right_in = residual.as_ref().subcols(half, len - half);
        let left_span = span.start..span.start + half;
        let right_span = span.start + half..span.end;
        let (left, right) = if ctx.parallel {
            rayon::join(
                || analyze_bin(ctx, left_in, left_span, level + 1, 2 * bin_index, left_out),
                || analyze_bin(ctx, right_in, right_span, level + 1, 2 * bin_index + 1, right_out),
            )
        } else {
            (
                analyze_bin(ctx, left_in, left_span, level + 1, 2 * bin_index, left_out),
                analyze_bin(ctx, right_in, right_span, level + 1, 2 * bin_index + 1, right_out),
            )
        };
        children = vec![left, right];
    }

    MrdmdNode {
        level,
        bin_index,
        span,
        subsample_indices,
        f_sp,
        dmd,
        failure,
        slow_set,
        children,
    }
}

/// Converts a rational plan quantity for display and serialization.
pub fn q(x: Rational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Largest eigenvalue modulus among slow modes, a cheap stability hint.
pub fn max_slow_modulus(node: &MrdmdNode) -> Option<f64> {
    let d = node.dmd.as_ref()?;
    node.slow_set.iter().map(|&k| d.eigenvalues[k].norm()).reduce(f64::max)
}
