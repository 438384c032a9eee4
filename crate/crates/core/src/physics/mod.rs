//! Closed-form two-level-system quantities and the analytic models shared by
//! the simulator and the fitter.

pub(crate) mod convolution;
mod g2;
mod params;
pub mod quadrature;
mod scan;
pub mod special;
mod two_level;

pub use convolution::{
    convolve_with_irf, tcspc_decay, ConvolutionError, Convolved, ExpShape, ExpSum, ExpTerm, FnResponse, TimeResponse,
};
pub use g2::{g2_background, g2_resonant_weak, ResonantWeakG2, EQUAL_TIMES_RTOL};
pub use params::{DriveParams, EmitterParams, G2BackgroundModel, IrfParams};
pub use scan::{scan_spectrum, DisplaySpectra, ScanOptions, ScanResult, DEFAULT_RESOLUTION_UEV};
pub use two_level::{
    detuned_intensity, linewidth_from_t2, power_broadened_fwhm, resonant_intensity, saturation_parameter,
    t2_from_linewidth,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("invalid {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("resonant intensity requires zero laser detuning (got {0} rad/ps); use detuned_intensity")]
    DetunedDrive(f64),
    #[error("scan grid is empty")]
    EmptyGrid,
    #[error("scan grid is not monotone at index {0}")]
    NonMonotoneGrid(usize),
}

impl PhysicsError {
    pub(crate) fn invalid(name: &'static str, value: f64, reason: &'static str) -> Self {
        PhysicsError::InvalidParameter { name, value, reason }
    }
}
