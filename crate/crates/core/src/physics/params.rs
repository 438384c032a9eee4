use serde::{Deserialize, Serialize};

use super::PhysicsError;
use crate::units::fwhm_to_sigma;

/// Two-level emitter: radiative lifetime, coherence time and an optional
/// fine-structure doublet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmitterParams {
    /// Radiative lifetime T₁ [ps].
    pub t1: f64,
    /// Coherence time T₂ [ps], at most 2·T₁.
    pub t2: f64,
    /// Transition energy [µeV].
    pub transition_energy: f64,
    /// Doublet separation [µeV], if the line is split.
    pub fss_splitting: Option<f64>,
    /// Relative strengths of the two doublet components.
    pub fss_weights: Option<(f64, f64)>,
}

impl EmitterParams {
    pub fn new(t1: f64, t2: f64) -> Result<Self, PhysicsError> {
        let e = EmitterParams {
            t1,
            t2,
            transition_energy: 0.0,
            fss_splitting: None,
            fss_weights: None,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn with_transition_energy(mut self, energy_uev: f64) -> Self {
        self.transition_energy = energy_uev;
        self
    }

    pub fn with_doublet(mut self, splitting_uev: f64, weights: (f64, f64)) -> Result<Self, PhysicsError> {
        self.fss_splitting = Some(splitting_uev);
        self.fss_weights = Some(weights);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        positive("t1", self.t1)?;
        positive("t2", self.t2)?;
        if self.t2 > 2.0 * self.t1 {
            return Err(PhysicsError::invalid("t2", self.t2, "must not exceed 2·t1"));
        }
        if !self.transition_energy.is_finite() {
            return Err(PhysicsError::invalid("transition_energy", self.transition_energy, "must be finite"));
        }
        if let Some(split) = self.fss_splitting {
            positive("fss_splitting", split)?;
        }
        if let Some((a, b)) = self.fss_weights {
            positive("fss_weights[0]", a)?;
            positive("fss_weights[1]", b)?;
        }
        Ok(())
    }

    /// Spectral components as (energy offset from the line centre [µeV], weight).
    ///
    /// A single line is one component with weight 1; a doublet sits at
    /// ±splitting/2 with the configured weights (equal weights by default).
    pub fn components(&self) -> Vec<(f64, f64)> {
        match self.fss_splitting {
            None => vec![(0.0, 1.0)],
            Some(split) => {
                let (wa, wb) = self.fss_weights.unwrap_or((1.0, 1.0));
                vec![(-0.5 * split, wa), (0.5 * split, wb)]
            }
        }
    }
}

/// Continuous-wave resonant drive with Ω² = β·P₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    /// Optical power P₀ [nW].
    pub power: f64,
    /// Power-to-Rabi coefficient β [rad²·ps⁻²·nW⁻¹].
    pub beta: f64,
    /// Laser detuning δ [rad/ps].
    pub laser_detuning: f64,
}

impl DriveParams {
    pub fn new(power: f64, beta: f64) -> Result<Self, PhysicsError> {
        let d = DriveParams {
            power,
            beta,
            laser_detuning: 0.0,
        };
        d.validate()?;
        Ok(d)
    }

    /// Drive that realises a given saturation parameter for `e` at `power`.
    pub fn for_saturation(e: &EmitterParams, s: f64, power: f64) -> Result<Self, PhysicsError> {
        positive("power", power)?;
        if !(s >= 0.0) || !s.is_finite() {
            return Err(PhysicsError::invalid("saturation", s, "must be finite and non-negative"));
        }
        let beta = s / (power * e.t1 * e.t2);
        if beta == 0.0 {
            // Zero drive: keep beta valid and switch the laser off instead.
            return DriveParams::new(0.0, 1.0);
        }
        DriveParams::new(power, beta)
    }

    pub fn with_detuning(mut self, delta: f64) -> Self {
        self.laser_detuning = delta;
        self
    }

    pub fn with_power(mut self, power: f64) -> Self {
        self.power = power;
        self
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        if !(self.power >= 0.0) || !self.power.is_finite() {
            return Err(PhysicsError::invalid("power", self.power, "must be finite and non-negative"));
        }
        positive("beta", self.beta)?;
        if !self.laser_detuning.is_finite() {
            return Err(PhysicsError::invalid("laser_detuning", self.laser_detuning, "must be finite"));
        }
        Ok(())
    }

    /// Ω² [rad²/ps²].
    #[inline]
    pub fn rabi_squared(&self) -> f64 {
        self.beta * self.power
    }

    #[inline]
    pub fn rabi_frequency(&self) -> f64 {
        self.rabi_squared().sqrt()
    }
}

/// Gaussian instrument response. A zero FWHM is the ideal response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrfParams {
    /// FWHM [ps].
    pub fwhm: f64,
}

impl IrfParams {
    pub fn new(fwhm: f64) -> Result<Self, PhysicsError> {
        if !(fwhm >= 0.0) || !fwhm.is_finite() {
            return Err(PhysicsError::invalid("irf_fwhm", fwhm, "must be finite and non-negative"));
        }
        Ok(IrfParams { fwhm })
    }

    pub const fn ideal() -> Self {
        IrfParams { fwhm: 0.0 }
    }

    /// Response of two independent Gaussian detectors added in quadrature.
    pub fn from_detector_pair(jitter_a: f64, jitter_b: f64) -> Result<Self, PhysicsError> {
        IrfParams::new(jitter_a.hypot(jitter_b))
    }

    #[inline]
    pub fn sigma(&self) -> f64 {
        fwhm_to_sigma(self.fwhm)
    }

    #[inline]
    pub fn is_ideal(&self) -> bool {
        self.fwhm == 0.0
    }
}

/// Background-diluted antibunching: signal fraction ρ and dip time constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2BackgroundModel {
    /// ρ = S/(S+B).
    pub rho: f64,
    /// Antibunching time constant t_m [ps].
    pub t_m: f64,
}

impl G2BackgroundModel {
    pub fn new(rho: f64, t_m: f64) -> Result<Self, PhysicsError> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(PhysicsError::invalid("rho", rho, "must lie in [0, 1]"));
        }
        positive("t_m", t_m)?;
        Ok(G2BackgroundModel { rho, t_m })
    }
}

fn positive(name: &'static str, v: f64) -> Result<(), PhysicsError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(PhysicsError::invalid(name, v, "must be finite and positive"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coherence_bound_enforced() {
        assert!(EmitterParams::new(670.0, 460.0).is_ok());
        assert!(EmitterParams::new(100.0, 200.0).is_ok());
        assert!(EmitterParams::new(100.0, 200.1).is_err());
        assert!(EmitterParams::new(0.0, 1.0).is_err());
        assert!(EmitterParams::new(1.0, -1.0).is_err());
    }

    #[test]
    fn doublet_validation() {
        let e = EmitterParams::new(670.0, 460.0).unwrap();
        assert!(e.with_doublet(11.3, (1.0, 1.0)).is_ok());
        assert!(e.with_doublet(0.0, (1.0, 1.0)).is_err());
        assert!(e.with_doublet(11.3, (1.0, 0.0)).is_err());
        let comps = e.with_doublet(10.0, (1.0, 2.0)).unwrap().components();
        assert_eq!(comps, vec![(-5.0, 1.0), (5.0, 2.0)]);
    }

    #[test]
    fn drive_validation() {
        assert!(DriveParams::new(0.0, 1e-9).is_ok());
        assert!(DriveParams::new(-1.0, 1e-9).is_err());
        assert!(DriveParams::new(1.0, 0.0).is_err());
    }

    #[test]
    fn detector_pair_quadrature() {
        let w = 400.0 / 2f64.sqrt();
        let irf = IrfParams::from_detector_pair(w, w).unwrap();
        assert!((irf.fwhm - 400.0).abs() < 1e-12);
    }

    #[test]
    fn background_model_bounds() {
        assert!(G2BackgroundModel::new(1.0, 500.0).is_ok());
        assert!(G2BackgroundModel::new(1.01, 500.0).is_err());
        assert!(G2BackgroundModel::new(0.5, 0.0).is_err());
    }
}
