use serde::{Deserialize, Serialize};

use super::special::gaussian_pdf;
use super::{detuned_intensity, DriveParams, EmitterParams, PhysicsError};
use crate::sim::ChannelModel;
use crate::units::{energy_to_angular, fwhm_to_sigma};

/// Spectrometer resolution of the displayed µ-PL spectra [µeV].
pub const DEFAULT_RESOLUTION_UEV: f64 = 35.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    /// Constant scattered-laser level added to the emitter-line channel.
    pub stray_light: f64,
    /// Spectrometer resolution FWHM for the displayed spectra [µeV]; 0 disables them.
    pub resolution_uev: f64,
    /// Cavity-mode energy relative to the emitter line [µeV].
    pub mode_detuning_uev: f64,
    /// Number of energy samples per displayed spectrum.
    pub display_points: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            stray_light: 0.0,
            resolution_uev: DEFAULT_RESOLUTION_UEV,
            mode_detuning_uev: 200.0,
            display_points: 401,
        }
    }
}

/// Per-channel intensities of a laser-detuning scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    /// Laser detuning from the line centre [µeV].
    pub detuning_uev: Vec<f64>,
    /// Emitter-line channel: resonance fluorescence plus stray light.
    pub emitter: Vec<f64>,
    /// Cavity-mode channel.
    pub mode: Vec<f64>,
    /// Resolution-limited spectra for display; never used for linewidths.
    pub display: Option<DisplaySpectra>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplaySpectra {
    /// Photon energy relative to the emitter line [µeV].
    pub energy_uev: Vec<f64>,
    /// One spectrum per scan point.
    pub rows: Vec<Vec<f64>>,
}

/// Simulates a cw laser scan over the emitter line on a detuning grid [µeV].
///
/// The emitter emission at each detuning is Σₖ wₖ·ρ_ee(δ − offsetₖ) over the
/// fine-structure components. The mode channel receives the fraction η of it,
/// the emitter-line channel the rest plus the stray-light constant.
pub fn scan_spectrum(
    e: &EmitterParams,
    d: &DriveParams,
    grid_uev: &[f64],
    ch: &ChannelModel,
    opts: &ScanOptions,
) -> Result<ScanResult, PhysicsError> {
    if grid_uev.is_empty() {
        return Err(PhysicsError::EmptyGrid);
    }
    let increasing = grid_uev.len() < 2 || grid_uev[1] > grid_uev[0];
    for (i, w) in grid_uev.windows(2).enumerate() {
        if (w[1] > w[0]) != increasing || w[1] == w[0] {
            return Err(PhysicsError::NonMonotoneGrid(i + 1));
        }
    }
    if !(opts.resolution_uev >= 0.0) {
        return Err(PhysicsError::invalid("resolution_uev", opts.resolution_uev, "must be non-negative"));
    }
    let eta = ch.mode_fraction;
    let components = e.components();
    let emission: Vec<f64> = grid_uev
        .iter()
        .map(|&delta| {
            components
                .iter()
                .map(|&(offset, weight)| {
                    let drive = d.with_detuning(energy_to_angular(delta - offset));
                    weight * detuned_intensity(e, &drive)
                })
                .sum()
        })
        .collect();
    let emitter: Vec<f64> = emission.iter().map(|&x| (1.0 - eta) * x + opts.stray_light).collect();
    let mode: Vec<f64> = emission.iter().map(|&x| eta * x).collect();

    let display = (opts.resolution_uev > 0.0 && opts.display_points >= 2).then(|| {
        let sigma = fwhm_to_sigma(opts.resolution_uev);
        let lo = grid_uev.iter().copied().fold(0.0f64, f64::min).min(opts.mode_detuning_uev) - 4.0 * opts.resolution_uev;
        let hi = grid_uev.iter().copied().fold(0.0f64, f64::max).max(opts.mode_detuning_uev) + 4.0 * opts.resolution_uev;
        let n = opts.display_points;
        let energy: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let rows = grid_uev
            .iter()
            .zip(emitter.iter().zip(&mode))
            .map(|(&delta, (&line, &cav))| {
                energy
                    .iter()
                    .map(|&en| line * gaussian_pdf(en - delta, sigma) + cav * gaussian_pdf(en - opts.mode_detuning_uev, sigma))
                    .collect()
            })
            .collect();
        DisplaySpectra { energy_uev: energy, rows }
    });

    Ok(ScanResult {
        detuning_uev: grid_uev.to_vec(),
        emitter,
        mode,
        display,
    })
}
