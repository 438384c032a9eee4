use rayon::prelude::*;

use super::histogram::{merge, CorrelationHistogram};
use super::{bin_index, CorrelationError, CorrelationMode, CorrelationRequest};
use crate::sim::TimestampStream;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "ANTIBUNCH_THREADS";

/// Thread cap from [`THREADS_ENV`], if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    let v = std::env::var(THREADS_ENV).ok()?;
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => Some(n),
        _ => {
            log::warn!("ignoring {THREADS_ENV}={v:?}: expected a positive integer");
            None
        }
    }
}

struct Channels {
    start: Vec<u64>,
    stop: Vec<u64>,
    duration: u64,
}

fn prepare(stream: &TimestampStream, req: &CorrelationRequest) -> Result<Channels, CorrelationError> {
    req.validate()?;
    if let Some(i) = stream.first_unsorted() {
        return Err(CorrelationError::Unsorted(i));
    }
    let start = stream.times(req.start_channel);
    if start.is_empty() {
        return Err(CorrelationError::EmptyChannel(req.start_channel));
    }
    let stop = if req.is_auto() { start.clone() } else { stream.times(req.stop_channel) };
    if stop.is_empty() {
        return Err(CorrelationError::EmptyChannel(req.stop_channel));
    }
    let span = stream.records().last().map_or(0, |r| r.time_ps + 1);
    let duration = if stream.duration_ps() > 0 { stream.duration_ps() } else { span };
    Ok(Channels { start, stop, duration })
}

/// Accumulates coincidences for `starts[lo..hi]` against every stop.
/// For an autocorrelation `starts` and `stops` are the same list and a start
/// is never paired with itself.
fn accumulate(starts: &[u64], lo: usize, hi: usize, stops: &[u64], auto: bool, req: &CorrelationRequest) -> Vec<u64> {
    let k = req.half_bins();
    let w = req.bin_width_ps as i64;
    let mut raw = vec![0u64; (2 * k + 1) as usize];
    if lo >= hi {
        return raw;
    }
    let mut add = |tau: i64| {
        let b = bin_index(tau, w);
        if (-k..=k).contains(&b) {
            raw[(b + k) as usize] += 1;
        }
    };
    match req.mode {
        CorrelationMode::AllPairs => {
            let reach = k * w + w;
            let first = starts[lo] as i64 - reach;
            let mut j0 = stops.partition_point(|&t| (t as i64) < first);
            for i in lo..hi {
                let s = starts[i] as i64;
                while j0 < stops.len() && (stops[j0] as i64) < s - reach {
                    j0 += 1;
                }
                let mut j = j0;
                while j < stops.len() && (stops[j] as i64) <= s + reach {
                    if !(auto && j == i) {
                        add(stops[j] as i64 - s);
                    }
                    j += 1;
                }
            }
        }
        CorrelationMode::StartStop => {
            let delay = req.stop_delay_ps as i64;
            let first = starts[lo] as i64 - delay;
            let mut j = stops.partition_point(|&t| (t as i64) < first);
            for i in lo..hi {
                let s = starts[i] as i64;
                while j < stops.len() && (stops[j] as i64) < s - delay {
                    j += 1;
                }
                let mut next = j;
                if auto && next == i {
                    next += 1;
                }
                if next < stops.len() {
                    add(stops[next] as i64 - s);
                }
            }
        }
    }
    raw
}

fn segment(ch: &Channels, req: &CorrelationRequest, a: u64, b: u64) -> CorrelationHistogram {
    let lo = ch.start.partition_point(|&t| t < a);
    let hi = ch.start.partition_point(|&t| t < b);
    let stop_lo = ch.stop.partition_point(|&t| t < a);
    let stop_hi = ch.stop.partition_point(|&t| t < b);
    let mut h = CorrelationHistogram::empty(*req);
    h.raw = accumulate(&ch.start, lo, hi, &ch.stop, req.is_auto(), req);
    h.start_counts = (hi - lo) as u64;
    h.stop_counts = (stop_hi - stop_lo) as u64;
    h.duration_ps = b - a;
    h
}

/// Single-pass raw histogram over the whole stream.
pub fn correlate(stream: &TimestampStream, req: &CorrelationRequest) -> Result<CorrelationHistogram, CorrelationError> {
    let ch = prepare(stream, req)?;
    let end = ch.duration.max(ch.start[ch.start.len() - 1] + 1).max(ch.stop[ch.stop.len() - 1] + 1);
    let mut h = segment(&ch, req, 0, end);
    h.duration_ps = ch.duration;
    Ok(h)
}

/// Raw histogram for starts in `[a, b)` paired with stops from the whole
/// stream. Counts and integration time cover `[a, b)`, so merging the
/// segments of a partition reproduces [`correlate`] exactly.
pub fn correlate_segment(
    stream: &TimestampStream,
    req: &CorrelationRequest,
    a: u64,
    b: u64,
) -> Result<CorrelationHistogram, CorrelationError> {
    if b < a {
        return Err(CorrelationError::InvalidRequest(format!("segment [{a}, {b}) is reversed")));
    }
    let ch = prepare(stream, req)?;
    Ok(segment(&ch, req, a, b))
}

/// [`correlate`] split into `segments` time slices accumulated in parallel
/// and merged. The result does not depend on the slicing or thread count.
pub fn correlate_parallel(
    stream: &TimestampStream,
    req: &CorrelationRequest,
    segments: usize,
) -> Result<CorrelationHistogram, CorrelationError> {
    let ch = prepare(stream, req)?;
    let segments = segments.max(1) as u64;
    let end = ch.duration.max(ch.start[ch.start.len() - 1] + 1).max(ch.stop[ch.stop.len() - 1] + 1);
    let bounds: Vec<(u64, u64)> = (0..segments)
        .map(|i| (end / segments * i, if i + 1 == segments { end } else { end / segments * (i + 1) }))
        .collect();
    let run = || -> Vec<CorrelationHistogram> { bounds.par_iter().map(|&(a, b)| segment(&ch, req, a, b)).collect() };
    let parts = match thread_cap() {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        },
        None => run(),
    };
    let mut h = CorrelationHistogram::empty(*req);
    for p in &parts {
        h = merge(&h, p)?;
    }
    h.duration_ps = ch.duration;
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{merge_channels, StreamMeta};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn poisson_times(rate: f64, duration: u64, seed: u64) -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = 0.0;
        let mut out = Vec::new();
        loop {
            t += -(1.0 - rng.random::<f64>()).ln() / rate;
            if t >= duration as f64 {
                return out;
            }
            out.push(t as u64);
        }
    }

    fn two_channel(rate: f64, duration: u64, seed: u64) -> TimestampStream {
        let a = poisson_times(rate, duration, seed);
        let b = poisson_times(rate, duration, seed + 1000);
        merge_channels([(0, a.as_slice()), (1, b.as_slice())], StreamMeta { duration_ps: duration, ..Default::default() })
    }

    fn brute_force(stream: &TimestampStream, req: &CorrelationRequest) -> Vec<u64> {
        let k = req.half_bins();
        let w = req.bin_width_ps as f64;
        let mut raw = vec![0u64; (2 * k + 1) as usize];
        let recs = stream.records();
        for (i, s) in recs.iter().enumerate() {
            if s.channel != req.start_channel {
                continue;
            }
            for (j, t) in recs.iter().enumerate() {
                if t.channel != req.stop_channel || i == j {
                    continue;
                }
                let tau = t.time_ps as f64 - s.time_ps as f64;
                let b = (tau / w + 0.5).floor() as i64;
                if b.abs() <= k {
                    raw[(b + k) as usize] += 1;
                }
            }
        }
        raw
    }

    #[test]
    fn hand_countable_pair() {
        let s = merge_channels([(0, &[0u64][..]), (1, &[500u64][..])], StreamMeta { duration_ps: 10_000, ..Default::default() });
        let req = CorrelationRequest::new(0, 1, 100, 1000, CorrelationMode::AllPairs);
        let h = correlate(&s, &req).unwrap();
        let taus = h.tau_ps();
        let hit: Vec<i64> = taus.iter().zip(&h.raw).filter(|(_, &c)| c > 0).map(|(&t, _)| t).collect();
        // 500 is an edge between the 400 and 500 bins and belongs to the upper one.
        assert_eq!(hit, vec![500]);
        let ss = correlate(&s, &CorrelationRequest { mode: CorrelationMode::StartStop, ..req }).unwrap();
        assert_eq!(ss.raw, h.raw);
    }

    #[test]
    fn matches_brute_force_cross_and_auto() {
        let s = two_channel(2e-4, 10_000_000, 3);
        for (a, b) in [(0, 1), (1, 0), (0, 0)] {
            let req = CorrelationRequest::new(a, b, 250, 20_000, CorrelationMode::AllPairs);
            let h = correlate(&s, &req).unwrap();
            assert_eq!(h.raw, brute_force(&s, &req), "channels {a}->{b}");
        }
    }

    #[test]
    fn segments_merge_bit_exactly() {
        let s = two_channel(1e-4, 100_000_000, 11);
        let req = CorrelationRequest::new(0, 1, 100, 5000, CorrelationMode::AllPairs);
        let whole = correlate(&s, &req).unwrap();
        for n in [1, 3, 8, 17] {
            assert_eq!(correlate_parallel(&s, &req, n).unwrap(), whole);
        }
        let d = s.duration_ps();
        let mut merged = CorrelationHistogram::empty(req);
        for i in 0..8 {
            let part = correlate_segment(&s, &req, d / 8 * i, if i == 7 { d } else { d / 8 * (i + 1) }).unwrap();
            merged = merge(&merged, &part).unwrap();
        }
        assert_eq!(merged, whole);
    }

    #[test]
    fn start_stop_approaches_all_pairs_at_low_rate() {
        // rate·τ_max = 0.01
        let rate = 1e-6;
        let s = two_channel(rate, 1_500_000_000_000, 5);
        let req = CorrelationRequest::new(0, 1, 1000, 10_000, CorrelationMode::AllPairs);
        let ap = correlate(&s, &req).unwrap();
        let ss = correlate(&s, &CorrelationRequest { mode: CorrelationMode::StartStop, ..req }).unwrap();
        let k = req.half_bins() as usize;
        let (sum_ap, sum_ss): (u64, u64) = (ap.raw[k + 1..].iter().sum(), ss.raw[k + 1..].iter().sum());
        assert!(sum_ap > 10_000);
        let rel = (sum_ap - sum_ss) as f64 / sum_ap as f64;
        assert!(rel < 0.01, "{rel}");
        // A TAC without stop delay never records negative delays.
        assert!(ss.raw[..k].iter().all(|&c| c == 0));
    }

    #[test]
    fn stop_delay_exposes_negative_delays() {
        let s = two_channel(1e-6, 100_000_000_000, 8);
        let req = CorrelationRequest::new(0, 1, 1000, 10_000, CorrelationMode::StartStop).with_stop_delay(10_000);
        let h = correlate(&s, &req).unwrap();
        let k = req.half_bins() as usize;
        assert!(h.raw[..k].iter().sum::<u64>() > 0);
    }

    #[test]
    fn errors_name_the_problem() {
        let s = two_channel(1e-4, 1_000_000, 1);
        let req = CorrelationRequest::new(0, 7, 100, 1000, CorrelationMode::AllPairs);
        assert_eq!(correlate(&s, &req), Err(CorrelationError::EmptyChannel(7)));
        let bad = CorrelationRequest::new(0, 1, 100, 999, CorrelationMode::AllPairs);
        assert!(matches!(correlate(&s, &bad), Err(CorrelationError::InvalidRequest(_))));
    }
}
