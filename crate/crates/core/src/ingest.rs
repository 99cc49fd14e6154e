//! Measurement loading and missing-sample handling.
//!
//! A [`SignalRecord`] holds one or more equally long, uniformly sampled
//! channels. Missing samples are tracked in a per-channel mask and replaced
//! at load time according to a [`FillPolicy`], so every stored value is finite.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on time-column spacing (and on time column vs. configured dt).
pub const DT_TOLERANCE: f64 = 1e-6;

/// How masked samples are replaced before analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FillPolicy {
    /// Masked samples become 0.0.
    #[default]
    Zero,
    /// Masked samples repeat the last observed value (0.0 before any observation).
    HoldLast,
}

impl FromStr for FillPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zero" => Ok(FillPolicy::Zero),
            "hold-last" | "hold_last" => Ok(FillPolicy::HoldLast),
            _ => Err(Error::UnknownFillPolicy(s.to_string())),
        }
    }
}

impl fmt::Display for FillPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FillPolicy::Zero => f.write_str("zero"),
            FillPolicy::HoldLast => f.write_str("hold-last"),
        }
    }
}

impl FillPolicy {
    /// Overwrites every masked entry of `values` in place.
    pub fn apply(self, values: &mut [f64], missing: &[bool]) {
        let mut last = 0.0;
        for (v, &m) in values.iter_mut().zip(missing) {
            if m {
                *v = match self {
                    FillPolicy::Zero => 0.0,
                    FillPolicy::HoldLast => last,
                };
            } else {
                last = *v;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IngestConfig {
    /// Sample interval in seconds. Required unless `time_column` is set.
    pub dt: Option<f64>,
    /// First row holds channel names.
    pub has_header: bool,
    /// First column holds sample times in seconds.
    pub time_column: bool,
    pub fill_policy: FillPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: String,
    pub values: Vec<f64>,
    /// `true` where the sample is absent.
    pub missing: Vec<bool>,
}

/// Uniformly sampled multichannel time series.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalRecord {
    channels: Vec<Channel>,
    dt: f64,
    t0: f64,
    fill_policy: FillPolicy,
}

impl SignalRecord {
    /// Validates the channels and fills masked samples with `fill_policy`.
    pub fn new(mut channels: Vec<Channel>, dt: f64, t0: f64, fill_policy: FillPolicy) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive and finite, got {dt}"
            )));
        }
        if !t0.is_finite() {
            return Err(Error::InvalidParameter(format!("t0 must be finite, got {t0}")));
        }
        let len = channels.first().map_or(0, |c| c.values.len());
        if channels.is_empty() || len < 2 {
            return Err(Error::TooFewSamples(len));
        }
        for c in &mut channels {
            if c.values.len() != len || c.missing.len() != len {
                return Err(Error::ShapeMismatch(format!(
                    "channel `{}` has {} values and {} mask entries, expected {len}",
                    c.name,
                    c.values.len(),
                    c.missing.len()
                )));
            }
            fill_policy.apply(&mut c.values, &c.missing);
            if let Some(i) = c.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "channel `{}` has a non-finite value at index {i}",
                    c.name
                )));
            }
        }
        Ok(Self {
            channels,
            dt,
            t0,
            fill_policy,
        })
    }

    /// Single unmasked channel; convenient for generated data.
    pub fn from_samples(name: &str, values: Vec<f64>, dt: f64, t0: f64) -> Result<Self> {
        let missing = vec![false; values.len()];
        Self::new(
            vec![Channel {
                name: name.to_string(),
                values,
                missing,
            }],
            dt,
            t0,
            FillPolicy::default(),
        )
    }

    pub fn len(&self) -> usize {
        self.channels[0].values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn fill_policy(&self) -> FillPolicy {
        self.fill_policy
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel_names(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|c| c.name.as_str())
    }

    pub fn channel(&self, name: &str) -> Result<&Channel> {
        self.channels
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::UnknownChannel(name.to_string()))
    }

    /// Sample time of index `i`.
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    /// Returns a copy with `[start, start + gap_length)` masked and filled
    /// with the record's fill policy in every channel.
    pub fn inject_gap(&self, start: usize, gap_length: usize) -> Result<SignalRecord> {
        inject_gap(self, start, gap_length)
    }
}

fn is_missing_marker(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c.eq_ignore_ascii_case("nan")
}

/// Parses CSV text into a record. See [`load_csv`].
///
/// Blank lines are significant: in a single-column file an empty line is an
/// empty cell, i.e. a missing sample.
pub fn parse_csv<R: Read>(mut reader: R, config: &IngestConfig) -> Result<SignalRecord> {
    let mut text = String::new();
    reader.read_to_string(&mut text).map_err(|e| Error::Parse {
        line: 0,
        message: e.to_string(),
    })?;

    let mut lines = text.lines().enumerate();
    let mut names: Option<Vec<String>> = None;
    if config.has_header {
        match lines.next() {
            Some((_, header)) => names = Some(split_row(header).map(|c| c.trim_matches('"').to_string()).collect()),
            None => return Err(Error::TooFewSamples(0)),
        }
    }

    let value_offset = usize::from(config.time_column);
    let mut width: Option<usize> = names.as_ref().map(Vec::len);
    let mut times = Vec::new();
    let mut columns: Vec<(Vec<f64>, Vec<bool>)> = Vec::new();
    for (row, text_line) in lines {
        let line = row + 1;
        let cells: Vec<&str> = split_row(text_line).collect();
        let expected = *width.get_or_insert(cells.len());
        if cells.len() != expected {
            return Err(Error::Parse {
                line,
                message: format!("expected {expected} fields, found {}", cells.len()),
            });
        }
        if expected <= value_offset {
            return Err(Error::Parse {
                line,
                message: "no data columns".into(),
            });
        }
        if columns.is_empty() {
            columns = vec![(Vec::new(), Vec::new()); expected - value_offset];
        }
        if config.time_column {
            let cell = cells[0];
            let t = parse_finite(cell).ok_or_else(|| Error::Parse {
                line,
                message: format!("time value `{cell}` is not a finite number"),
            })?;
            times.push(t);
        }
        for (col, cell) in columns.iter_mut().zip(&cells[value_offset..]) {
            if is_missing_marker(cell) {
                col.0.push(0.0);
                col.1.push(true);
            } else {
                let v = parse_finite(cell).ok_or_else(|| Error::Parse {
                    line,
                    message: format!("`{cell}` is neither a finite number nor a missing marker"),
                })?;
                col.0.push(v);
                col.1.push(false);
            }
        }
    }

    let len = columns.first().map_or(0, |c| c.0.len());
    if len < 2 {
        return Err(Error::TooFewSamples(len));
    }

    let (dt, t0) = if config.time_column {
        let inferred = check_uniform(&times)?;
        if let Some(configured) = config.dt {
            if (inferred - configured).abs() > DT_TOLERANCE * configured {
                return Err(Error::InconsistentDt { inferred, configured });
            }
        }
        (config.dt.unwrap_or(inferred), times[0])
    } else {
        (config.dt.ok_or(Error::MissingDt)?, 0.0)
    };

    let names: Vec<String> = match names {
        Some(n) => n.into_iter().skip(value_offset).collect(),
        None => (0..columns.len()).map(|i| format!("ch{i}")).collect(),
    };
    let channels = names
        .into_iter()
        .zip(columns)
        .map(|(name, (values, missing))| Channel { name, values, missing })
        .collect();
    SignalRecord::new(channels, dt, t0, config.fill_policy)
}

fn split_row(line: &str) -> impl Iterator<Item = &str> {
    line.split(',').map(str::trim)
}

/// Loads a CSV file (`,` delimiter, `.` decimal point; empty cells and
/// `nan` tokens are missing samples).
pub fn load_csv(path: impl AsRef<Path>, config: &IngestConfig) -> Result<SignalRecord> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(file, config)
}

/// Writes a record as CSV with a header row. Masked samples are written as
/// empty cells so that loading the file again restores the mask.
pub fn write_csv(rec: &SignalRecord, path: impl AsRef<Path>, include_time: bool) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = std::io::BufWriter::new(File::create(path).map_err(io_err)?);
    write_csv_to(rec, &mut out, include_time).map_err(io_err)?;
    out.flush().map_err(io_err)
}

pub fn write_csv_to<W: Write>(rec: &SignalRecord, out: &mut W, include_time: bool) -> std::io::Result<()> {
    let mut header: Vec<&str> = Vec::new();
    if include_time {
        header.push("t");
    }
    header.extend(rec.channel_names());
    writeln!(out, "{}", header.join(","))?;
    for i in 0..rec.len() {
        let mut cells = Vec::with_capacity(header.len());
        if include_time {
            cells.push(format!("{:.16e}", rec.time(i)));
        }
        for c in rec.channels() {
            if c.missing[i] {
                cells.push(String::new());
            } else {
                cells.push(format!("{:.16e}", c.values[i]));
            }
        }
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Returns a copy with `[start, start + gap_length)` masked in every channel
/// and refilled with the record's fill policy. Other samples are untouched.
pub fn inject_gap(rec: &SignalRecord, start: usize, gap_length: usize) -> Result<SignalRecord> {
    let end = start
        .checked_add(gap_length)
        .filter(|&e| e <= rec.len())
        .ok_or(Error::GapOutOfRange {
            start,
            length: gap_length,
            record_len: rec.len(),
        })?;
    let mut out = rec.clone();
    for c in &mut out.channels {
        c.missing[start..end].iter_mut().for_each(|m| *m = true);
        // value just before the gap, already filled if it was itself masked
        let last = if start == 0 { 0.0 } else { c.values[start - 1] };
        for v in &mut c.values[start..end] {
            *v = match rec.fill_policy {
                FillPolicy::Zero => 0.0,
                FillPolicy::HoldLast => last,
            };
        }
    }
    Ok(out)
}

fn parse_finite(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Checks uniform spacing and returns the inferred interval.
fn check_uniform(times: &[f64]) -> Result<f64> {
    let n = times.len();
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::NonUniformTime {
            index: 1,
            deviation: dt.abs(),
            tolerance: 0.0,
        });
    }
    let tolerance = DT_TOLERANCE * dt;
    for (i, &t) in times.iter().enumerate() {
        let deviation = (t - (times[0] + i as f64 * dt)).abs();
        if deviation > tolerance {
            return Err(Error::NonUniformTime {
                index: i,
                deviation,
                tolerance,
            });
        }
    }
    Ok(dt)
}
