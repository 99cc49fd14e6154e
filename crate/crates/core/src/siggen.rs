//! Synthetic test signals with known modal content.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::SignalRecord;

/// `a · e^{σt} · cos(2πft + φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub frequency_hz: f64,
    /// σ, 1/s.
    pub growth_rate: f64,
    pub amplitude: f64,
    /// Radians.
    pub phase: f64,
}

impl ModeSpec {
    pub fn new(frequency_hz: f64, growth_rate: f64, amplitude: f64, phase: f64) -> Self {
        Self {
            frequency_hz,
            growth_rate,
            amplitude,
            phase,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * (self.growth_rate * t).exp() * (2.0 * PI * self.frequency_hz * t + self.phase).cos()
    }
}

/// Samples `dc + Σ modes + N(0, noise_std²)` at `fs` for `duration` seconds.
///
/// The record has `round(duration · fs)` samples starting at `t = 0` and a
/// single channel named `signal`. Noise is drawn from a ChaCha8 stream, so a
/// given seed always produces the same bits.
pub fn generate(
    modes: &[ModeSpec],
    dc: f64,
    fs: f64,
    duration: f64,
    noise_std: f64,
    seed: u64,
) -> Result<SignalRecord> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sample rate must be positive, got {fs}"
        )));
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "duration must be positive, got {duration}"
        )));
    }
    if !(noise_std.is_finite() && noise_std >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise std must be non-negative, got {noise_std}"
        )));
    }
    for m in modes {
        if !(m.frequency_hz.is_finite() && m.frequency_hz >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mode frequency must be non-negative, got {}",
                m.frequency_hz
            )));
        }
        if !(m.amplitude.is_finite() && m.growth_rate.is_finite() && m.phase.is_finite()) {
            return Err(Error::InvalidParameter("mode parameters must be finite".into()));
        }
        if 2.0 * m.frequency_hz >= fs {
            return Err(Error::Aliasing {
                frequency: m.frequency_hz,
                fs,
            });
        }
    }
    let n = (duration * fs).round() as usize;
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    let dt = 1.0 / fs;
    let mut values: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 * dt;
            dc + modes.iter().map(|m| m.eval(t)).sum::<f64>()
        })
        .collect();
    if noise_std > 0.0 {
        let normal = Normal::new(0.0, noise_std).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in &mut values {
            *v += normal.sample(&mut rng);
        }
    }
    SignalRecord::from_samples("signal", values, dt, 0.0)
}

/// Named generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub name: String,
    pub modes: Vec<ModeSpec>,
    pub dc: f64,
    pub fs: f64,
    pub duration: f64,
    pub noise_std: f64,
}

impl Profile {
    /// DC-link voltage with an undamped 8.6 Hz oscillation.
    pub fn lfo_udc() -> Self {
        Self {
            name: "lfo_udc".into(),
            modes: vec![ModeSpec::new(8.6, 0.0, 6.0, 0.0)],
            dc: 170.0,
            fs: 2500.0,
            duration: 2.0,
            noise_std: 0.05,
        }
    }

    /// AC input current: 50 Hz fundamental with sidebands at 50 ± 8.6 Hz.
    pub fn ac_in() -> Self {
        Self {
            name: "ac_in".into(),
            modes: vec![
                ModeSpec::new(50.0, 0.0, 10.0, 0.0),
                ModeSpec::new(41.4, 0.0, 2.0, 0.0),
                ModeSpec::new(58.6, 0.0, 2.0, 0.0),
            ],
            dc: 0.0,
            fs: 2500.0,
            duration: 2.0,
            noise_std: 0.05,
        }
    }

    pub fn names() -> &'static [&'static str] {
        &["lfo_udc", "ac_in"]
    }

    pub fn generate(&self, seed: u64) -> Result<SignalRecord> {
        generate(&self.modes, self.dc, self.fs, self.duration, self.noise_std, seed)
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "lfo_udc" => Ok(Self::lfo_udc()),
            "ac_in" => Ok(Self::ac_in()),
            _ => Err(Error::InvalidParameter(format!(
                "unknown profile {s:?} (known: {})",
                Self::names().join(", ")
            ))),
        }
    }
}
