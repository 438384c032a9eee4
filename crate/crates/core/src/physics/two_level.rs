use super::{DriveParams, EmitterParams, PhysicsError};
use crate::units::HBAR_UEV_PS;

/// Saturation parameter s = Ω²·T₁·T₂.
pub fn saturation_parameter(e: &EmitterParams, d: &DriveParams) -> f64 {
    d.rabi_squared() * e.t1 * e.t2
}

/// Steady-state excited population on resonance, ½·s/(1+s).
pub fn resonant_intensity(e: &EmitterParams, d: &DriveParams) -> Result<f64, PhysicsError> {
    if d.laser_detuning != 0.0 {
        return Err(PhysicsError::DetunedDrive(d.laser_detuning));
    }
    let s = saturation_parameter(e, d);
    Ok(0.5 * s / (1.0 + s))
}

/// Steady-state excited population at laser detuning δ,
/// ½·s/(1 + s + (δ·T₂)²).
pub fn detuned_intensity(e: &EmitterParams, d: &DriveParams) -> f64 {
    let s = saturation_parameter(e, d);
    let x = d.laser_detuning * e.t2;
    0.5 * s / (1.0 + s + x * x)
}

/// T₂ = 2ħ/Γ₀ for a zero-power linewidth Γ₀ [µeV].
pub fn t2_from_linewidth(gamma0: f64) -> Result<f64, PhysicsError> {
    if !(gamma0 > 0.0) || !gamma0.is_finite() {
        return Err(PhysicsError::invalid("gamma0", gamma0, "linewidth must be finite and positive"));
    }
    Ok(2.0 * HBAR_UEV_PS / gamma0)
}

/// Γ₀ = 2ħ/T₂ [µeV].
pub fn linewidth_from_t2(t2: f64) -> Result<f64, PhysicsError> {
    if !(t2 > 0.0) || !t2.is_finite() {
        return Err(PhysicsError::invalid("t2", t2, "must be finite and positive"));
    }
    Ok(2.0 * HBAR_UEV_PS / t2)
}

/// Power-broadened FWHM Γ₀·√(1+s) [µeV].
pub fn power_broadened_fwhm(e: &EmitterParams, d: &DriveParams) -> f64 {
    let s = saturation_parameter(e, d);
    2.0 * HBAR_UEV_PS / e.t2 * (1.0 + s).sqrt()
}
