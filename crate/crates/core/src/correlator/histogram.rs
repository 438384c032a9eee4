use serde::{Deserialize, Serialize};

use super::{CorrelationError, CorrelationMode, CorrelationRequest};
use crate::units::ps_to_s;

/// Coincidence histogram over bins `−K..=K`.
///
/// Counts and the integration time are kept as integers so that merging
/// partial histograms is exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationHistogram {
    pub request: CorrelationRequest,
    /// Raw coincidences, index `b + K`.
    pub raw: Vec<u64>,
    /// Start events counted during the integration time.
    pub start_counts: u64,
    /// Stop events counted during the integration time.
    pub stop_counts: u64,
    /// Integration time Δt_int [ps].
    pub duration_ps: u64,
    /// Externally supplied (start, stop) rates [counts/s], used in place of
    /// counts/duration when present.
    pub rate_override: Option<(f64, f64)>,
    /// g² per bin, present once normalised.
    pub normalized: Option<Vec<f64>>,
    /// 1σ error of the normalised values.
    pub sigma: Option<Vec<f64>>,
}

impl CorrelationHistogram {
    /// Histogram with no counts and zero integration time; the identity of
    /// [`merge`].
    pub fn empty(request: CorrelationRequest) -> Self {
        let n = 2 * request.half_bins() as usize + 1;
        CorrelationHistogram {
            request,
            raw: vec![0; n],
            start_counts: 0,
            stop_counts: 0,
            duration_ps: 0,
            rate_override: None,
            normalized: None,
            sigma: None,
        }
    }

    pub fn bin_width_ps(&self) -> u64 {
        self.request.bin_width_ps
    }

    pub fn half_bins(&self) -> i64 {
        self.request.half_bins()
    }

    pub fn mode(&self) -> CorrelationMode {
        self.request.mode
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized.is_some()
    }

    /// Bin centres [ps].
    pub fn tau_ps(&self) -> Vec<i64> {
        let k = self.half_bins();
        let w = self.request.bin_width_ps as i64;
        (-k..=k).map(|b| b * w).collect()
    }

    pub fn total_counts(&self) -> u64 {
        self.raw.iter().sum()
    }

    /// Integration time Δt_int [s].
    pub fn integration_time_s(&self) -> f64 {
        ps_to_s(self.duration_ps as f64)
    }

    /// (start, stop) count rates [counts/s].
    pub fn rates(&self) -> (f64, f64) {
        if let Some(r) = self.rate_override {
            return r;
        }
        let t = self.integration_time_s();
        if t > 0.0 {
            (self.start_counts as f64 / t, self.stop_counts as f64 / t)
        } else {
            (0.0, 0.0)
        }
    }

    /// Expected coincidences per bin for uncorrelated light:
    /// N_start·N_stop·Δt_int·Δt_MCA with rates in counts/s and times in s.
    pub fn n_poisson(&self) -> f64 {
        let (a, b) = self.rates();
        a * b * self.integration_time_s() * ps_to_s(self.request.bin_width_ps as f64)
    }

    /// Index of the zero-delay bin.
    pub fn zero_bin(&self) -> usize {
        self.half_bins() as usize
    }
}

/// Divides raw counts by the Poisson expectation; errors are √max(raw, 1)
/// scaled the same way.
pub fn poisson_normalize(h: &CorrelationHistogram) -> Result<CorrelationHistogram, CorrelationError> {
    if h.is_normalized() {
        return Err(CorrelationError::AlreadyNormalized);
    }
    if h.duration_ps == 0 {
        return Err(CorrelationError::ZeroRate("integration time"));
    }
    let (a, b) = h.rates();
    if !(a > 0.0) {
        return Err(CorrelationError::ZeroRate("start rate"));
    }
    if !(b > 0.0) {
        return Err(CorrelationError::ZeroRate("stop rate"));
    }
    let n = h.n_poisson();
    let mut out = h.clone();
    out.normalized = Some(h.raw.iter().map(|&c| c as f64 / n).collect());
    out.sigma = Some(h.raw.iter().map(|&c| (c.max(1) as f64).sqrt() / n).collect());
    Ok(out)
}

/// Bin-wise sum of two raw histograms with pooled counts and integration time.
pub fn merge(a: &CorrelationHistogram, b: &CorrelationHistogram) -> Result<CorrelationHistogram, CorrelationError> {
    if a.is_normalized() || b.is_normalized() {
        return Err(CorrelationError::AlreadyNormalized);
    }
    let (ra, rb) = (&a.request, &b.request);
    if ra.bin_width_ps != rb.bin_width_ps {
        return Err(CorrelationError::BinningMismatch("bin width"));
    }
    if ra.half_bins() != rb.half_bins() {
        return Err(CorrelationError::BinningMismatch("window"));
    }
    if ra.mode != rb.mode || ra.stop_delay_ps != rb.stop_delay_ps {
        return Err(CorrelationError::BinningMismatch("mode"));
    }
    if (ra.start_channel, ra.stop_channel) != (rb.start_channel, rb.stop_channel) {
        return Err(CorrelationError::BinningMismatch("channels"));
    }
    let mut out = CorrelationHistogram::empty(*ra);
    // Canonical request so that merge is commutative even when tau_max_ps
    // differs within the same bin count.
    out.request.tau_max_ps = ra.tau_max_ps.min(rb.tau_max_ps);
    out.raw = a.raw.iter().zip(&b.raw).map(|(x, y)| x + y).collect();
    out.start_counts = a.start_counts + b.start_counts;
    out.stop_counts = a.stop_counts + b.stop_counts;
    out.duration_ps = a.duration_ps + b.duration_ps;
    Ok(out)
}
