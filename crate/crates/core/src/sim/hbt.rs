use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::rng::{stage_rng, Stage};
use crate::units::fwhm_to_sigma;

/// Single-photon detector: efficiency, Gaussian timing jitter and a
/// non-paralysable dead time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorModel {
    pub efficiency: f64,
    #[serde(rename = "jitter_fwhm_ps")]
    pub jitter_fwhm: f64,
    #[serde(rename = "dead_time_ps")]
    pub dead_time: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        DetectorModel::ideal()
    }
}

impl DetectorModel {
    pub const fn ideal() -> Self {
        DetectorModel {
            efficiency: 1.0,
            jitter_fwhm: 0.0,
            dead_time: 0.0,
        }
    }

    pub fn is_ideal(&self) -> bool {
        *self == DetectorModel::ideal()
    }

    /// Returns the offending (field, value, reason) on failure.
    pub fn validate(&self) -> Result<(), (String, f64, &'static str)> {
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(("efficiency".into(), self.efficiency, "must lie in (0, 1]"));
        }
        if !(self.jitter_fwhm >= 0.0) || !self.jitter_fwhm.is_finite() {
            return Err(("jitter_fwhm_ps".into(), self.jitter_fwhm, "must be finite and non-negative"));
        }
        if !(self.dead_time >= 0.0) || !self.dead_time.is_finite() {
            return Err(("dead_time_ps".into(), self.dead_time, "must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Applies efficiency thinning, jitter and dead time to sorted arrival times.
///
/// Jittered times are rounded to whole picoseconds and re-sorted; events that
/// leave `[0, duration)` are lost. A detection is suppressed when it follows
/// the previous registered detection by less than the dead time.
pub fn apply_detector<R: Rng + ?Sized>(times: &[u64], det: &DetectorModel, duration_ps: u64, rng: &mut R) -> Vec<u64> {
    if det.is_ideal() {
        return times.to_vec();
    }
    let sigma = fwhm_to_sigma(det.jitter_fwhm);
    let jitter = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite sigma"));
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if det.efficiency < 1.0 && rng.random::<f64>() >= det.efficiency {
            continue;
        }
        match &jitter {
            None => out.push(t),
            Some(n) => {
                let tj = (t as f64 + n.sample(rng)).round();
                if tj >= 0.0 && tj < duration_ps as f64 {
                    out.push(tj as u64);
                }
            }
        }
    }
    if jitter.is_some() {
        out.sort_unstable();
    }
    if det.dead_time > 0.0 {
        let mut last: Option<u64> = None;
        out.retain(|&t| match last {
            Some(l) if ((t - l) as f64) < det.dead_time => false,
            _ => {
                last = Some(t);
                true
            }
        });
    }
    out
}

/// 50/50 beam splitter followed by one detector per output port.
pub fn hbt_split(
    times: &[u64],
    det_a: &DetectorModel,
    det_b: &DetectorModel,
    duration_ps: u64,
    seed: u64,
) -> (Vec<u64>, Vec<u64>) {
    let mut rng = stage_rng(seed, Stage::HbtSplitter);
    let (mut a, mut b) = (Vec::with_capacity(times.len() / 2), Vec::with_capacity(times.len() / 2));
    for &t in times {
        if rng.random::<bool>() {
            a.push(t);
        } else {
            b.push(t);
        }
    }
    let a = apply_detector(&a, det_a, duration_ps, &mut stage_rng(seed, Stage::HbtDetectorA));
    let b = apply_detector(&b, det_b, duration_ps, &mut stage_rng(seed, Stage::HbtDetectorB));
    (a, b)
}
