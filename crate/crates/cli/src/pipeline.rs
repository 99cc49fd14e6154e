//! Orchestration of load → embed → analyse → write.

use std::path::Path;

use faer::Par;
use mrdmd::dmd::{dmd_reducing_rank, DmdResult};
use mrdmd::ingest::{inject_gap, load_csv, IngestConfig, SignalRecord};
use mrdmd::modes::{classify, dominant_oscillation, mode_reports, verdict, ModeReport};
use mrdmd::mrdmd::{decompose, plan, DecomposeOptions, MrdmdPlan, MrdmdResult};
use mrdmd::siggen::ModeSpec;
use mrdmd::stacking::{default_stack_depth, delay_embed, shifted_pair, SnapshotMatrix};

use crate::config::{Emit, RunConfig, Source};
use crate::error::{CliError, Result};
use crate::output::{
    eigenvalue_rows, fmt_f, mode_rows, node_infos, plan_rows, write_json, write_table, Comparison, GapInfo,
    MethodSummary, PlanInfo, Report, SourceInfo, Truth, EIGENVALUE_HEADER, MODE_HEADER, PLAN_HEADER,
};

/// A loaded, gapped, and embedded dataset ready for analysis.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub record: SignalRecord,
    pub channel: String,
    /// Snapshot matrix restricted to the analysis window.
    pub snapshots: SnapshotMatrix,
    pub source: SourceInfo,
    /// Planted mode with the largest amplitude, when the data is synthetic.
    pub truth: Option<ModeSpec>,
}

impl Prepared {
    pub fn columns(&self) -> usize {
        self.snapshots.ncols()
    }

    /// Channel values over the analysis window.
    pub fn measured(&self) -> &[f64] {
        &self.channel_data().values[..self.columns()]
    }

    pub fn missing(&self) -> &[bool] {
        &self.channel_data().missing[..self.columns()]
    }

    fn channel_data(&self) -> &mrdmd::ingest::Channel {
        self.record
            .channel(&self.channel)
            .expect("channel validated in prepare")
    }

    /// RMSE of `estimate` against the measurement over observed samples.
    pub fn rmse(&self, estimate: &[f64]) -> Option<f64> {
        masked_rms(self.measured().iter().zip(estimate).map(|(m, e)| m - e), self.missing())
    }

    pub fn signal_rms(&self) -> Option<f64> {
        masked_rms(self.measured().iter().copied(), self.missing())
    }
}

fn masked_rms(values: impl Iterator<Item = f64>, missing: &[bool]) -> Option<f64> {
    let (sum, count) = values
        .zip(missing)
        .filter(|(_, &m)| !m)
        .fold((0.0, 0usize), |(s, c), (v, _)| (s + v * v, c + 1));
    (count > 0).then(|| (sum / count as f64).sqrt())
}

/// Loads the input file or generates the profile, with the configured fill
/// policy and gap applied.
pub fn load_record(cfg: &RunConfig) -> Result<(SignalRecord, SourceInfo, Option<ModeSpec>)> {
    let (rec, source, truth) = match &cfg.source {
        Source::File(path) => {
            let ingest = IngestConfig {
                dt: cfg.dt,
                has_header: cfg.has_header,
                time_column: cfg.time_column,
                fill_policy: cfg.fill,
            };
            let rec = load_csv(path, &ingest)?;
            let info = SourceInfo {
                kind: "file".into(),
                name: path.display().to_string(),
                seed: None,
            };
            (rec, info, None)
        }
        Source::Profile { profile, seed } => {
            let generated = profile.generate(*seed)?;
            let rec = SignalRecord::new(generated.channels().to_vec(), generated.dt(), generated.t0(), cfg.fill)?;
            let truth = profile
                .modes
                .iter()
                .copied()
                .max_by(|a, b| a.amplitude.abs().total_cmp(&b.amplitude.abs()));
            let info = SourceInfo {
                kind: "profile".into(),
                name: profile.name.clone(),
                seed: Some(*seed),
            };
            (rec, info, truth)
        }
    };
    let rec = match cfg.gap {
        Some((start, len)) => inject_gap(&rec, start, len)?,
        None => rec,
    };
    Ok((rec, source, truth))
}

/// Loads, embeds, and restricts to the analysis window.
///
/// Also switches the linear-algebra backend to sequential execution so that
/// results are bit-reproducible regardless of the machine's core count.
pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    faer::set_global_parallelism(Par::Seq);
    let (record, source, truth) = load_record(cfg)?;
    let channel = match &cfg.channel {
        Some(c) => record.channel(c)?.name.clone(),
        None => record.channels()[0].name.clone(),
    };
    let depth = cfg.stack.unwrap_or_else(|| default_stack_depth(record.len()));
    let full = delay_embed(&record, &channel, depth)?;
    let n = match cfg.columns {
        Some(n) if n > full.ncols() => {
            return Err(CliError::Config(format!(
                "--columns {n} exceeds the {} embedded snapshot columns",
                full.ncols()
            )))
        }
        Some(n) => n,
        None => (full.ncols() - 1).max(2),
    };
    let snapshots = full.truncate_columns(n)?;
    Ok(Prepared {
        record,
        channel,
        snapshots,
        source,
        truth,
    })
}

#[derive(Debug, Clone)]
pub struct DmdRun {
    pub result: DmdResult,
    /// All modes, conjugate pairs collapsed, ranked.
    pub modes: Vec<ModeReport>,
    /// Leading-row reconstruction over the window.
    pub reconstruction: Vec<f64>,
}

impl DmdRun {
    pub fn dominant(&self) -> Option<&ModeReport> {
        dominant_oscillation(&self.modes)
    }
}

/// Single-window DMD over the prepared snapshots.
pub fn analyze_dmd(prep: &Prepared, cfg: &RunConfig) -> Result<DmdRun> {
    let (x1, x2) = shifted_pair(&prep.snapshots)?;
    let dt = prep.snapshots.dt();
    let result = dmd_reducing_rank(x1.as_ref(), x2.as_ref(), &cfg.rule, dt)?;
    let n = prep.columns();
    let mut modes = mode_reports(&result, 1.0 / dt, n, 1, 0, None, cfg.eps_crit);
    classify(&mut modes, cfg.eps_crit);
    let rec = result.reconstruct_snapshots(n);
    let reconstruction = (0..n).map(|j| rec[(0, j)]).collect();
    Ok(DmdRun {
        result,
        modes,
        reconstruction,
    })
}

#[derive(Debug, Clone)]
pub struct MrdmdRun {
    pub result: MrdmdResult,
    pub reconstruction: Vec<f64>,
}

impl MrdmdRun {
    pub fn dominant(&self) -> Option<&ModeReport> {
        dominant_oscillation(&self.result.all_modes)
    }
}

pub fn mrdmd_plan(prep: &Prepared, cfg: &RunConfig) -> Result<MrdmdPlan> {
    Ok(plan(
        prep.columns(),
        prep.snapshots.dt(),
        cfg.mu,
        cfg.g,
        cfg.termination_level,
    )?)
}

/// MR-DMD over the prepared snapshots; sibling bins run on `cfg.threads` workers.
pub fn analyze_mrdmd(prep: &Prepared, cfg: &RunConfig) -> Result<MrdmdRun> {
    let plan = mrdmd_plan(prep, cfg)?;
    let options = DecomposeOptions {
        rule: cfg.rule,
        eps_crit: cfg.eps_crit,
        parallel: cfg.threads > 1,
    };
    let result = if cfg.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| CliError::Config(format!("cannot start {} threads: {e}", cfg.threads)))?;
        pool.install(|| decompose(&prep.snapshots, &plan, &options))?
    } else {
        decompose(&prep.snapshots, &plan, &options)?
    };
    let reconstruction = (0..prep.columns())
        .map(|j| result.total_reconstruction[(0, j)])
        .collect();
    Ok(MrdmdRun { result, reconstruction })
}

fn base_report(
    prep: &Prepared,
    cfg: &RunConfig,
    method: &str,
    modes: Vec<ModeReport>,
    reconstruction: &[f64],
) -> Report {
    let dominant = dominant_oscillation(&modes).cloned();
    Report {
        method: method.into(),
        source: prep.source.clone(),
        channel: prep.channel.clone(),
        samples: prep.record.len(),
        dt: prep.record.dt(),
        missing_samples: prep
            .record
            .channel(&prep.channel)
            .map_or(0, |c| c.missing.iter().filter(|&&m| m).count()),
        stack_depth: prep.snapshots.stack_depth(),
        rows: prep.snapshots.nrows(),
        columns: prep.columns(),
        truncation: cfg.rule,
        eps_crit: cfg.eps_crit,
        rank: None,
        rank_clamped: None,
        verdict: verdict(dominant.as_ref()),
        dominant_mode: dominant,
        reconstruction_rmse: prep.rmse(reconstruction),
        signal_rms: prep.signal_rms(),
        modes,
        plan: None,
        nodes: None,
    }
}

fn write_reconstruction(path: &Path, prep: &Prepared, series: &[&[f64]], names: &[&str]) -> Result<()> {
    let mut header = vec!["t", "measured"];
    header.extend_from_slice(names);
    header.push("missing");
    let rows = (0..prep.columns()).map(|j| {
        let mut row = vec![
            fmt_f(prep.snapshots.t0() + j as f64 * prep.snapshots.dt()),
            fmt_f(prep.measured()[j]),
        ];
        row.extend(series.iter().map(|s| fmt_f(s[j])));
        row.push(u8::from(prep.missing()[j]).to_string());
        row
    });
    write_table(path, &header, rows)
}

/// `analyze dmd`: writes eigenvalues.csv, modes.csv, reconstruction.csv, report.json.
pub fn run_dmd(cfg: &RunConfig) -> Result<Report> {
    let prep = prepare(cfg)?;
    let run = analyze_dmd(&prep, cfg)?;
    let out = &cfg.out_dir;
    if cfg.emits(Emit::Eigenvalues) {
        let dt = prep.snapshots.dt();
        let rows = eigenvalue_rows(&run.result, 1.0 / dt, prep.columns(), 1, 0, None, cfg.eps_crit);
        write_table(&out.join("eigenvalues.csv"), &EIGENVALUE_HEADER, rows)?;
        write_table(&out.join("modes.csv"), &MODE_HEADER, mode_rows(&run.modes))?;
    }
    if cfg.emits(Emit::Reconstruction) {
        write_reconstruction(
            &out.join("reconstruction.csv"),
            &prep,
            &[&run.reconstruction],
            &["reconstructed"],
        )?;
    }
    let mut report = base_report(&prep, cfg, "dmd", run.modes.clone(), &run.reconstruction);
    report.rank = Some(run.result.rank());
    report.rank_clamped = Some(run.result.rank_clamped);
    if cfg.emits(Emit::Report) {
        write_json(&out.join("report.json"), &report)?;
    }
    Ok(report)
}

/// `analyze mrdmd`: additionally writes plan.csv and level_<l>.csv.
pub fn run_mrdmd(cfg: &RunConfig) -> Result<Report> {
    let prep = prepare(cfg)?;
    let run = analyze_mrdmd(&prep, cfg)?;
    let res = &run.result;
    let out = &cfg.out_dir;
    if cfg.emits(Emit::Plan) {
        write_table(&out.join("plan.csv"), &PLAN_HEADER, plan_rows(&res.plan))?;
    }
    if cfg.emits(Emit::Eigenvalues) {
        let rows = res.nodes().flat_map(|node| match &node.dmd {
            Some(d) => eigenvalue_rows(
                d,
                node.f_sp,
                cfg.mu,
                node.level,
                node.bin_index,
                Some(&node.slow_set),
                cfg.eps_crit,
            ),
            None => Vec::new(),
        });
        write_table(&out.join("eigenvalues.csv"), &EIGENVALUE_HEADER, rows)?;
        write_table(&out.join("modes.csv"), &MODE_HEADER, mode_rows(&res.all_modes))?;
    }
    if cfg.emits(Emit::Reconstruction) {
        write_reconstruction(
            &out.join("reconstruction.csv"),
            &prep,
            &[&run.reconstruction],
            &["reconstructed"],
        )?;
    }
    if cfg.emits(Emit::Levels) {
        for (l, level) in res.per_level_reconstruction.iter().enumerate() {
            let rows = (0..prep.columns()).map(|j| {
                vec![
                    fmt_f(prep.snapshots.t0() + j as f64 * prep.snapshots.dt()),
                    fmt_f(level[(0, j)]),
                ]
            });
            write_table(&out.join(format!("level_{}.csv", l + 1)), &["t", "value"], rows)?;
        }
    }
    let mut report = base_report(&prep, cfg, "mrdmd", res.all_modes.clone(), &run.reconstruction);
    report.plan = Some(PlanInfo::from(&res.plan));
    report.nodes = Some(node_infos(res));
    if cfg.emits(Emit::Report) {
        write_json(&out.join("report.json"), &report)?;
    }
    Ok(report)
}

fn summarize(
    outcome: std::result::Result<(Option<ModeReport>, Vec<f64>), CliError>,
    prep: &Prepared,
    truth: Option<Truth>,
) -> (MethodSummary, Option<Vec<f64>>) {
    match outcome {
        Ok((dominant, reconstruction)) => {
            let err = |f: fn(&ModeReport, &Truth) -> f64| dominant.as_ref().zip(truth.as_ref()).map(|(d, t)| f(d, t));
            let summary = MethodSummary {
                identified: dominant.is_some(),
                failure: None,
                frequency_error_hz: err(|d, t| (d.frequency_hz - t.frequency_hz).abs()),
                growth_rate_error: err(|d, t| (d.growth_rate - t.growth_rate).abs()),
                reconstruction_rmse: prep.rmse(&reconstruction),
                dominant_mode: dominant,
            };
            (summary, Some(reconstruction))
        }
        Err(e) => (
            MethodSummary {
                identified: false,
                failure: Some(e.to_string()),
                dominant_mode: None,
                frequency_error_hz: None,
                growth_rate_error: None,
                reconstruction_rmse: None,
            },
            None,
        ),
    }
}

/// `analyze compare`: both methods on the same (gapped) data; writes
/// compare.json and reconstruction.csv with both estimates.
///
/// A method that cannot identify a mode is reported as such; it is not an error.
pub fn run_compare(cfg: &RunConfig) -> Result<Comparison> {
    let prep = prepare(cfg)?;
    let truth = prep.truth.map(|m| Truth {
        frequency_hz: m.frequency_hz,
        growth_rate: m.growth_rate,
    });
    let dmd_outcome = analyze_dmd(&prep, cfg).map(|r| (r.dominant().cloned(), r.reconstruction));
    let mrdmd_outcome = analyze_mrdmd(&prep, cfg).map(|r| (r.dominant().cloned(), r.reconstruction));
    let (dmd, dmd_rec) = summarize(dmd_outcome, &prep, truth);
    let (mrdmd, mrdmd_rec) = summarize(mrdmd_outcome, &prep, truth);

    let rmse_ratio = match (dmd.reconstruction_rmse, mrdmd.reconstruction_rmse) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    };
    let mrdmd_damping_more_accurate = match (dmd.growth_rate_error, mrdmd.growth_rate_error) {
        (Some(a), Some(b)) => Some(b < a),
        _ => None,
    };
    let comparison = Comparison {
        source: prep.source.clone(),
        truth,
        gap: cfg.gap.map(|(start, length)| GapInfo { start, length }),
        dmd,
        mrdmd,
        rmse_ratio,
        mrdmd_damping_more_accurate,
    };
    let out = &cfg.out_dir;
    if cfg.emits(Emit::Reconstruction) {
        let nan = vec![f64::NAN; prep.columns()];
        let d = dmd_rec.as_deref().unwrap_or(&nan);
        let m = mrdmd_rec.as_deref().unwrap_or(&nan);
        write_reconstruction(&out.join("reconstruction.csv"), &prep, &[d, m], &["dmd", "mrdmd"])?;
    }
    if cfg.emits(Emit::Report) {
        write_json(&out.join("compare.json"), &comparison)?;
    }
    Ok(comparison)
}
