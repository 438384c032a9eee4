//! The sweep correlator against a quadratic reference, and exactness of
//! segment merging.

use antibunch::correlator::{correlate, correlate_parallel, correlate_segment, merge, CorrelationMode, CorrelationRequest};
use antibunch::io::{read_timestamps, write_timestamps_binary, write_timestamps_csv};
use antibunch::sim::{merge_channels, StreamMeta, TimestampStream};
use proptest::prelude::*;

const DURATION: u64 = 200_000;

fn bin_of(tau: i64, w: u64) -> i64 {
    (tau as f64 / w as f64 + 0.5).floor() as i64
}

/// Every (start, stop) pair, or for start–stop the first stop at or after
/// `start − delay` that is not the start event itself.
fn reference(s: &TimestampStream, req: &CorrelationRequest) -> Vec<u64> {
    let k = req.half_bins();
    let mut raw = vec![0u64; (2 * k + 1) as usize];
    let recs = s.records();
    let delay = req.stop_delay_ps as i64;
    for (i, a) in recs.iter().enumerate() {
        if a.channel != req.start_channel {
            continue;
        }
        let stops = recs
            .iter()
            .enumerate()
            .filter(|&(j, b)| b.channel == req.stop_channel && j != i)
            .map(|(_, b)| b.time_ps as i64 - a.time_ps as i64);
        let taus: Vec<i64> = match req.mode {
            CorrelationMode::AllPairs => stops.collect(),
            CorrelationMode::StartStop => stops.filter(|&t| t >= -delay).min().into_iter().collect(),
        };
        for tau in taus {
            let b = bin_of(tau, req.bin_width_ps);
            if b.abs() <= k {
                raw[(b + k) as usize] += 1;
            }
        }
    }
    raw
}

fn stream() -> impl Strategy<Value = TimestampStream> {
    // Two channels; narrow time ranges force ties and dense coincidences.
    (prop::collection::vec(0..DURATION, 1..120), prop::collection::vec(0..DURATION, 1..120), 1u64..=4).prop_map(
        |(a, b, squeeze)| {
            let a: Vec<u64> = a.into_iter().map(|t| t / squeeze).collect();
            let b: Vec<u64> = b.into_iter().map(|t| t / squeeze).collect();
            merge_channels([(0, a.as_slice()), (1, b.as_slice())], StreamMeta { duration_ps: DURATION, ..Default::default() })
        },
    )
}

fn request() -> impl Strategy<Value = CorrelationRequest> {
    (0u8..2, 0u8..2, 1u64..2_000, 10u64..40, prop::bool::ANY, 0u64..5_000).prop_map(|(a, b, w, bins, ss, delay)| {
        let mode = if ss { CorrelationMode::StartStop } else { CorrelationMode::AllPairs };
        CorrelationRequest::new(a, b, w, w * bins, mode).with_stop_delay(delay)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn sweep_matches_quadratic_reference(s in stream(), req in request()) {
        let h = correlate(&s, &req).unwrap();
        prop_assert_eq!(h.raw, reference(&s, &req));
    }

    #[test]
    fn merged_segments_equal_single_pass(
        s in stream(),
        req in request(),
        mut cuts in prop::collection::vec(0..DURATION, 0..6),
    ) {
        let whole = correlate(&s, &req).unwrap();
        cuts.push(0);
        cuts.push(DURATION);
        cuts.sort_unstable();
        let mut h = antibunch::correlator::CorrelationHistogram::empty(req);
        for w in cuts.windows(2) {
            h = merge(&h, &correlate_segment(&s, &req, w[0], w[1]).unwrap()).unwrap();
        }
        prop_assert_eq!(&h, &whole);
        prop_assert_eq!(correlate_parallel(&s, &req, cuts.len()).unwrap(), whole);
    }

    #[test]
    fn timestamp_formats_are_lossless(s in stream()) {
        let mut bin = Vec::new();
        write_timestamps_binary(&s, &mut bin).unwrap();
        let mut csv = Vec::new();
        write_timestamps_csv(&s, &mut csv).unwrap();
        prop_assert_eq!(read_timestamps(bin.as_slice()).unwrap().into_records(), s.records());
        prop_assert_eq!(read_timestamps(csv.as_slice()).unwrap().into_records(), s.records());
    }
}
