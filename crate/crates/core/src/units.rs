//! Fixed internal unit system.
//!
//! Times are picoseconds, energies are micro-electronvolts and angular
//! frequencies are rad/ps. Every conversion between energy and frequency goes
//! through [`PhysicalConstants`].

/// CODATA 2018 constants expressed in the internal units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Reduced Planck constant in µeV·ps.
    pub hbar: f64,
    /// Planck constant in µeV·ns (equivalently µeV/GHz).
    pub h: f64,
}

impl PhysicalConstants {
    pub const CODATA: PhysicalConstants = PhysicalConstants {
        hbar: 658.211_956_9,
        h: 4.135_667_696,
    };
}

pub const HBAR_UEV_PS: f64 = PhysicalConstants::CODATA.hbar;
pub const H_UEV_NS: f64 = PhysicalConstants::CODATA.h;

pub const PS_PER_S: f64 = 1e12;

/// Ratio between the FWHM and the standard deviation of a Gaussian.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Energy detuning [µeV] to angular frequency [rad/ps].
#[inline]
pub fn energy_to_angular(energy_uev: f64) -> f64 {
    energy_uev / HBAR_UEV_PS
}

/// Angular frequency [rad/ps] to energy [µeV].
#[inline]
pub fn angular_to_energy(omega: f64) -> f64 {
    omega * HBAR_UEV_PS
}

/// Optical frequency step [GHz] to energy step [µeV].
#[inline]
pub fn frequency_ghz_to_energy(f_ghz: f64) -> f64 {
    f_ghz * H_UEV_NS
}

#[inline]
pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / FWHM_PER_SIGMA
}

#[inline]
pub fn ps_to_s(t_ps: f64) -> f64 {
    t_ps / PS_PER_S
}
