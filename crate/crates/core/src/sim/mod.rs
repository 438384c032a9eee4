//! Monte Carlo generation of timestamped photon streams from a driven
//! two-level emitter.

mod emission;
mod hbt;
mod rng;
mod routing;
mod stream;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::physics::{DriveParams, EmitterParams, PhysicsError};

pub use emission::{
    simulate_emission_times, step_halving_check, StepHalvingReport, WaitingTimeDistribution,
};
pub use hbt::{apply_detector, hbt_split, DetectorModel};
pub use rng::{stage_rng, Stage};
pub use routing::route_and_background;
pub use stream::{merge_channels, Record, StreamMeta, TimestampStream};

/// Channel carrying photons emitted directly on the emitter line.
pub const EMITTER_CHANNEL: u8 = 0;
/// Channel carrying photons emitted through the detuned cavity mode.
pub const MODE_CHANNEL: u8 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error("integration step dt = {dt} ps is too coarse; must be at most {max} ps")]
    StepTooCoarse { dt: f64, max: f64 },
    #[error("invalid {name} = {value}: {reason}")]
    InvalidParameter {
        name: String,
        value: f64,
        reason: &'static str,
    },
    #[error("HBT source channel {0} is also an HBT output channel")]
    HbtChannelClash(u8),
}

/// Empirical mode-fraction table, e.g. η against QD–mode detuning or
/// temperature, linearly interpolated and clamped at its ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeFractionTable {
    /// Abscissa name, e.g. "detuning_uev" or "temperature_k".
    pub axis: String,
    /// (abscissa, η) pairs, sorted by abscissa.
    pub points: Vec<(f64, f64)>,
}

impl ModeFractionTable {
    pub fn new(axis: impl Into<String>, mut points: Vec<(f64, f64)>) -> Result<Self, SimError> {
        if points.is_empty() {
            return Err(SimError::InvalidParameter {
                name: "mode_fraction_table".into(),
                value: 0.0,
                reason: "needs at least one point",
            });
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(x, eta) in &points {
            if !x.is_finite() || !(0.0..=1.0).contains(&eta) {
                return Err(SimError::InvalidParameter {
                    name: "mode_fraction_table".into(),
                    value: eta,
                    reason: "fractions must lie in [0, 1] at finite abscissae",
                });
            }
        }
        Ok(ModeFractionTable { axis: axis.into(), points })
    }

    /// Parses CSV with a header whose first column is the abscissa and whose
    /// last column is the mode fraction.
    pub fn from_csv(text: &str) -> Result<Self, SimError> {
        let bad = |reason: &'static str| SimError::InvalidParameter {
            name: "mode_fraction_table".into(),
            value: f64::NAN,
            reason,
        };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| bad("missing header"))?;
        let axis = header.split(',').next().unwrap_or("").trim().to_string();
        let mut points = Vec::new();
        for line in lines {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() < 2 {
                return Err(bad("each row needs an abscissa and a fraction"));
            }
            let x = cols[0].parse::<f64>().map_err(|_| bad("abscissa is not a number"))?;
            let eta = cols[cols.len() - 1].parse::<f64>().map_err(|_| bad("fraction is not a number"))?;
            points.push((x, eta));
        }
        ModeFractionTable::new(axis, points)
    }

    pub fn fraction_at(&self, x: f64) -> f64 {
        let pts = &self.points;
        if x <= pts[0].0 {
            return pts[0].1;
        }
        if x >= pts[pts.len() - 1].0 {
            return pts[pts.len() - 1].1;
        }
        let i = pts.partition_point(|p| p.0 <= x);
        let (x0, y0) = pts[i - 1];
        let (x1, y1) = pts[i];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// Routing of emitted photons into emitter-line and mode channels plus
/// Poisson background per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    /// η: probability that an emitted photon leaves through the mode channel.
    pub mode_fraction: f64,
    /// Background rate [counts/ps] keyed by channel id.
    pub background_rates: BTreeMap<u8, f64>,
}

impl ChannelModel {
    pub fn new(mode_fraction: f64) -> Self {
        ChannelModel {
            mode_fraction,
            background_rates: BTreeMap::new(),
        }
    }

    pub fn from_table(table: &ModeFractionTable, at: f64) -> Self {
        ChannelModel::new(table.fraction_at(at))
    }

    pub fn with_background(mut self, channel: u8, rate_per_ps: f64) -> Self {
        self.background_rates.insert(channel, rate_per_ps);
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(0.0..=1.0).contains(&self.mode_fraction) {
            return Err(SimError::InvalidParameter {
                name: "mode_fraction".into(),
                value: self.mode_fraction,
                reason: "must lie in [0, 1]",
            });
        }
        for (&ch, &r) in &self.background_rates {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(SimError::InvalidParameter {
                    name: format!("background_rates[{ch}]"),
                    value: r,
                    reason: "must be finite and non-negative",
                });
            }
        }
        Ok(())
    }
}

/// Splits one routed channel into two detector channels behind a 50/50
/// beam splitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HbtConfig {
    pub source_channel: u8,
    pub channels: (u8, u8),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub emitter: EmitterParams,
    pub drive: DriveParams,
    pub channels: ChannelModel,
    /// Detector per output channel; channels without an entry are ideal.
    pub detectors: BTreeMap<u8, DetectorModel>,
    pub hbt: Option<HbtConfig>,
    pub duration_ps: u64,
    pub rng_seed: u64,
    /// Bloch-equation integration step [ps].
    pub dt_ps: f64,
}

impl SimConfig {
    pub fn new(emitter: EmitterParams, drive: DriveParams, duration_ps: u64, rng_seed: u64) -> Self {
        let mut cfg = SimConfig {
            emitter,
            drive,
            channels: ChannelModel::new(0.0),
            detectors: BTreeMap::new(),
            hbt: None,
            duration_ps,
            rng_seed,
            dt_ps: 1.0,
        };
        cfg.dt_ps = cfg.max_dt();
        cfg
    }

    /// Largest admissible step: min(T₁, T₂, 2π/Ω_eff)/50, where Ω_eff is the
    /// generalised Rabi frequency √(Ω² + δ²).
    pub fn max_dt(&self) -> f64 {
        let mut m = self.emitter.t1.min(self.emitter.t2);
        let w2 = self.drive.rabi_squared() + self.drive.laser_detuning.powi(2);
        if w2 > 0.0 {
            m = m.min(std::f64::consts::TAU / w2.sqrt());
        }
        m / 50.0
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.emitter.validate()?;
        self.drive.validate()?;
        self.channels.validate()?;
        if self.duration_ps == 0 {
            return Err(SimError::InvalidParameter {
                name: "duration_ps".into(),
                value: 0.0,
                reason: "must be positive",
            });
        }
        if !(self.dt_ps > 0.0) {
            return Err(SimError::InvalidParameter {
                name: "dt_ps".into(),
                value: self.dt_ps,
                reason: "must be positive",
            });
        }
        let max = self.max_dt();
        if self.dt_ps > max * (1.0 + 1e-12) {
            return Err(SimError::StepTooCoarse { dt: self.dt_ps, max });
        }
        for (&ch, det) in &self.detectors {
            det.validate().map_err(|(name, value, reason)| SimError::InvalidParameter {
                name: format!("detectors[{ch}].{name}"),
                value,
                reason,
            })?;
        }
        if let Some(h) = self.hbt {
            if h.channels.0 == h.channels.1 {
                return Err(SimError::HbtChannelClash(h.channels.0));
            }
        }
        Ok(())
    }
}

/// Full pipeline: emission, channel routing with background, optional HBT
/// split and detector response.
pub fn simulate(cfg: &SimConfig) -> Result<TimestampStream, SimError> {
    cfg.validate()?;
    let emissions = simulate_emission_times(cfg)?;
    let mut stream = route_and_background(&emissions, &cfg.channels, cfg.duration_ps, cfg.rng_seed);
    let ideal = DetectorModel::ideal();
    let mut split_outputs = Vec::new();
    if let Some(h) = cfg.hbt {
        let source = stream.times(h.source_channel);
        let det_a = cfg.detectors.get(&h.channels.0).unwrap_or(&ideal);
        let det_b = cfg.detectors.get(&h.channels.1).unwrap_or(&ideal);
        let (a, b) = hbt_split(&source, det_a, det_b, cfg.duration_ps, cfg.rng_seed);
        stream.remove_channel(h.source_channel);
        stream.replace_channel(h.channels.0, &a);
        stream.replace_channel(h.channels.1, &b);
        split_outputs.extend([h.channels.0, h.channels.1]);
    }
    for (&ch, det) in &cfg.detectors {
        if split_outputs.contains(&ch) {
            continue;
        }
        let times = stream.times(ch);
        if times.is_empty() {
            continue;
        }
        let mut rng = stage_rng(cfg.rng_seed, Stage::Detector(ch));
        let detected = apply_detector(&times, det, cfg.duration_ps, &mut rng);
        stream.replace_channel(ch, &detected);
    }
    stream.meta.seed = Some(cfg.rng_seed);
    Ok(stream)
}
