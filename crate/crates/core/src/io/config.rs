//! JSON configuration files, schema 1.
//!
//! Every physical quantity carries its unit in the key name. Unknown keys are
//! rejected and errors report the dotted path of the offending key.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::correlator::CorrelationRequest;
use crate::physics::{DriveParams, EmitterParams, PhysicsError, DEFAULT_RESOLUTION_UEV};
use crate::sim::{ChannelModel, DetectorModel, HbtConfig, ModeFractionTable, SimConfig, SimError};
use crate::units::{energy_to_angular, PS_PER_S};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema: u32,
    pub emitter: EmitterSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveSection>,
    #[serde(default)]
    pub channels: ChannelsSection,
    /// Detector per output channel; channels without one are ideal.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub detectors: BTreeMap<u8, DetectorModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbt: Option<HbtSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_ps: Option<u64>,
    #[serde(default)]
    pub rng_seed: u64,
    /// Integration step; defaults to the largest admissible one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_ps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<CorrelationRequest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saturation: Option<SaturationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tcspc: Option<TcspcSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterSection {
    pub t1_ps: f64,
    pub t2_ps: f64,
    #[serde(default)]
    pub transition_energy_uev: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fss_splitting_uev: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fss_weights: Option<(f64, f64)>,
}

/// Exactly one of `beta_rad2_per_ps2_per_nw` and `saturation_parameter`
/// fixes the drive strength at `power_nw`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    pub power_nw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_rad2_per_ps2_per_nw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saturation_parameter: Option<f64>,
    #[serde(default)]
    pub laser_detuning_uev: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelsSection {
    #[serde(default)]
    pub mode_fraction: ModeFractionSpec,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub background_rates_per_s: BTreeMap<u8, f64>,
}

/// The mode fraction η as a number, an inline table evaluated at `at`, or a
/// CSV table file (path relative to the config file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModeFractionSpec {
    Value(f64),
    Table {
        axis: String,
        points: Vec<(f64, f64)>,
        at: f64,
    },
    TableFile {
        table_csv: String,
        at: f64,
    },
}

impl Default for ModeFractionSpec {
    fn default() -> Self {
        ModeFractionSpec::Value(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HbtSection {
    pub source_channel: u8,
    pub channels: (u8, u8),
}

/// Laser-detuning scan. The step is given in GHz of laser frequency or in
/// µeV; without either it is 0.27 GHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub detuning_min_uev: f64,
    pub detuning_max_uev: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_ghz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_uev: Option<f64>,
    #[serde(default)]
    pub stray_light: f64,
    /// Spectrometer resolution of the display spectra; 0 omits them.
    /// Spectrometer resolution of the `--spectra` output; 0 disables it.
    #[serde(default = "default_resolution")]
    pub resolution_uev: f64,
    #[serde(default = "default_mode_detuning")]
    pub mode_detuning_uev: f64,
    #[serde(default = "default_display_points")]
    pub display_points: usize,
    /// Relative Gaussian noise on the tabulated intensities.
    #[serde(default)]
    pub noise_fraction: f64,
    /// Fit a Lorentzian singlet or doublet to the total intensity.
    #[serde(default)]
    pub fit: bool,
}

fn default_resolution() -> f64 {
    DEFAULT_RESOLUTION_UEV
}

fn default_mode_detuning() -> f64 {
    200.0
}

fn default_display_points() -> usize {
    401
}

/// Power series given as saturation parameters or as powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaturationSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub powers_nw: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TcspcSection {
    #[serde(default)]
    pub t_min_ps: f64,
    pub t_max_ps: f64,
    pub bin_ps: f64,
    pub irf_fwhm_ps: f64,
    #[serde(default)]
    pub t0_ps: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default)]
    pub background: f64,
    #[serde(default)]
    pub noise_fraction: f64,
    #[serde(default)]
    pub fit: bool,
}

fn one() -> f64 {
    1.0
}

fn config_error(key: &str, msg: impl std::fmt::Display) -> IoError {
    IoError::Config(format!("{key}: {msg}"))
}

fn physics_key(section: &str, e: PhysicsError) -> IoError {
    match e {
        PhysicsError::InvalidParameter { name, value, reason } => {
            let key = match name {
                "t1" => "t1_ps",
                "t2" => "t2_ps",
                "transition_energy" => "transition_energy_uev",
                "fss_splitting" => "fss_splitting_uev",
                "power" => "power_nw",
                "beta" => "beta_rad2_per_ps2_per_nw",
                "saturation" => "saturation_parameter",
                "laser_detuning" => "laser_detuning_uev",
                other => other,
            };
            config_error(&format!("{section}.{key}"), format!("{value} {reason}"))
        }
        other => config_error(section, other),
    }
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self, IoError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                IoError::Config(inner.to_string())
            } else {
                config_error(&path, inner)
            }
        })?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(config_error("schema", format!("expected {SCHEMA_VERSION}, got {}", cfg.schema)));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path)?;
        ConfigFile::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn emitter_params(&self) -> Result<EmitterParams, IoError> {
        let s = &self.emitter;
        let mut e = EmitterParams::new(s.t1_ps, s.t2_ps)
            .map_err(|e| physics_key("emitter", e))?
            .with_transition_energy(s.transition_energy_uev);
        e.fss_splitting = s.fss_splitting_uev;
        e.fss_weights = s.fss_weights;
        e.validate().map_err(|e| physics_key("emitter", e))?;
        Ok(e)
    }

    /// The drive; an absent section is no drive at all.
    pub fn drive_params(&self, e: &EmitterParams) -> Result<DriveParams, IoError> {
        let Some(d) = &self.drive else {
            return DriveParams::new(0.0, 1.0).map_err(|e| physics_key("drive", e));
        };
        let drive = match (d.beta_rad2_per_ps2_per_nw, d.saturation_parameter) {
            (Some(beta), None) => DriveParams::new(d.power_nw, beta),
            (None, Some(s)) => DriveParams::for_saturation(e, s, d.power_nw),
            _ => {
                return Err(config_error(
                    "drive",
                    "give exactly one of beta_rad2_per_ps2_per_nw and saturation_parameter",
                ))
            }
        }
        .map_err(|e| physics_key("drive", e))?;
        if !d.laser_detuning_uev.is_finite() {
            return Err(config_error("drive.laser_detuning_uev", "must be finite"));
        }
        Ok(drive.with_detuning(energy_to_angular(d.laser_detuning_uev)))
    }

    pub fn channel_model(&self, base_dir: &Path) -> Result<ChannelModel, IoError> {
        let key = "channels.mode_fraction";
        let sim = |e: SimError| config_error(key, e);
        let mut ch = match &self.channels.mode_fraction {
            ModeFractionSpec::Value(eta) => ChannelModel::new(*eta),
            ModeFractionSpec::Table { axis, points, at } => {
                ChannelModel::from_table(&ModeFractionTable::new(axis.clone(), points.clone()).map_err(sim)?, *at)
            }
            ModeFractionSpec::TableFile { table_csv, at } => {
                let path = base_dir.join(table_csv);
                let text = std::fs::read_to_string(&path).map_err(|e| config_error(key, format!("{}: {e}", path.display())))?;
                ChannelModel::from_table(&ModeFractionTable::from_csv(&text).map_err(sim)?, *at)
            }
        };
        for (&c, &rate) in &self.channels.background_rates_per_s {
            ch = ch.with_background(c, rate / PS_PER_S);
        }
        ch.validate().map_err(|e| match e {
            SimError::InvalidParameter { name, value, reason } if name.starts_with("background_rates") => {
                config_error(&format!("channels.{}", name.replace("background_rates", "background_rates_per_s")), format!("{value} {reason}"))
            }
            other => config_error(key, other),
        })?;
        Ok(ch)
    }

    /// Fully resolved simulator configuration; `seed` overrides `rng_seed`.
    pub fn sim_config(&self, base_dir: &Path, seed: Option<u64>) -> Result<SimConfig, IoError> {
        let e = self.emitter_params()?;
        let d = self.drive_params(&e)?;
        let duration = self.duration_ps.ok_or_else(|| config_error("duration_ps", "required for simulation"))?;
        let mut cfg = SimConfig::new(e, d, duration, seed.unwrap_or(self.rng_seed));
        cfg.channels = self.channel_model(base_dir)?;
        cfg.detectors = self.detectors.clone();
        cfg.hbt = self.hbt.map(|h| HbtConfig {
            source_channel: h.source_channel,
            channels: h.channels,
        });
        if let Some(dt) = self.dt_ps {
            cfg.dt_ps = dt;
        }
        cfg.validate().map_err(|e| match e {
            SimError::Physics(p) => physics_key("emitter", p),
            SimError::StepTooCoarse { .. } => config_error("dt_ps", e),
            SimError::InvalidParameter { name, value, reason } => config_error(&name, format!("{value} {reason}")),
            SimError::HbtChannelClash(_) => config_error("hbt.channels", e),
        })?;
        Ok(cfg)
    }
}
