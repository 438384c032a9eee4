//! Start–stop and all-pairs coincidence histograms with Poisson normalisation.
//!
//! Bin `b` covers delays `[b·Δ − Δ/2, b·Δ + Δ/2)` with τ = t_stop − t_start,
//! so the zero bin is centred on zero and a delay on a bin edge belongs to the
//! upper bin. The window holds bins `−K..=K` with `K = ⌊τ_max/Δ⌋`.

mod histogram;
mod sweep;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use histogram::{merge, poisson_normalize, CorrelationHistogram};
pub use sweep::{correlate, correlate_parallel, correlate_segment, thread_cap, THREADS_ENV};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrelationError {
    #[error("channel {0} has no events")]
    EmptyChannel(u8),
    #[error("stream is not time-sorted at record {0}")]
    Unsorted(usize),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("histograms differ in {0}")]
    BinningMismatch(&'static str),
    #[error("histogram is already normalized")]
    AlreadyNormalized,
    #[error("cannot normalize: {0} must be positive")]
    ZeroRate(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMode {
    /// Each start is paired with the next stop only, like a TAC.
    StartStop,
    /// Every start–stop pair inside the window.
    AllPairs,
}

impl CorrelationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CorrelationMode::StartStop => "start_stop",
            CorrelationMode::AllPairs => "all_pairs",
        }
    }
}

impl std::str::FromStr for CorrelationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "start_stop" => Ok(CorrelationMode::StartStop),
            "all_pairs" => Ok(CorrelationMode::AllPairs),
            other => Err(format!("unknown correlation mode '{other}' (expected start_stop or all_pairs)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationRequest {
    pub start_channel: u8,
    /// Equal to `start_channel` for an autocorrelation of one channel.
    pub stop_channel: u8,
    pub bin_width_ps: u64,
    pub tau_max_ps: u64,
    pub mode: CorrelationMode,
    /// Electronic delay on the stop line in start–stop mode, which lets the
    /// TAC see negative τ down to `−stop_delay_ps`.
    #[serde(default)]
    pub stop_delay_ps: u64,
}

impl CorrelationRequest {
    pub fn new(start_channel: u8, stop_channel: u8, bin_width_ps: u64, tau_max_ps: u64, mode: CorrelationMode) -> Self {
        CorrelationRequest {
            start_channel,
            stop_channel,
            bin_width_ps,
            tau_max_ps,
            mode,
            stop_delay_ps: 0,
        }
    }

    pub fn with_stop_delay(mut self, delay_ps: u64) -> Self {
        self.stop_delay_ps = delay_ps;
        self
    }

    pub fn validate(&self) -> Result<(), CorrelationError> {
        if self.bin_width_ps == 0 {
            return Err(CorrelationError::InvalidRequest("bin_width_ps must be positive".into()));
        }
        if self.tau_max_ps < 10 * self.bin_width_ps {
            return Err(CorrelationError::InvalidRequest(format!(
                "tau_max_ps = {} must be at least 10 bins ({} ps)",
                self.tau_max_ps,
                10 * self.bin_width_ps
            )));
        }
        if self.tau_max_ps > i64::MAX as u64 / 4 {
            return Err(CorrelationError::InvalidRequest("tau_max_ps is too large".into()));
        }
        Ok(())
    }

    /// K: the window holds bins `−K..=K`.
    pub fn half_bins(&self) -> i64 {
        (self.tau_max_ps / self.bin_width_ps) as i64
    }

    pub fn is_auto(&self) -> bool {
        self.start_channel == self.stop_channel
    }
}

/// Bin index of delay `tau` for bin width `width`.
#[inline]
pub fn bin_index(tau: i64, width: i64) -> i64 {
    (2 * tau + width).div_euclid(2 * width)
}
