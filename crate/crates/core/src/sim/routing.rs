use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::rng::{stage_rng, Stage};
use super::stream::{Record, StreamMeta, TimestampStream};
use super::{ChannelModel, EMITTER_CHANNEL, MODE_CHANNEL};

/// Sends each emission to the mode channel with probability η (otherwise the
/// emitter-line channel) and adds homogeneous Poisson background per channel.
///
/// Times are rounded to whole picoseconds; events outside `[0, duration)` are
/// dropped.
pub fn route_and_background(
    emissions: &[f64],
    channels: &ChannelModel,
    duration_ps: u64,
    seed: u64,
) -> TimestampStream {
    let mut rng = stage_rng(seed, Stage::Routing);
    let eta = channels.mode_fraction;
    let mut records = Vec::with_capacity(emissions.len());
    for &t in emissions {
        let ch = if rng.random::<f64>() < eta { MODE_CHANNEL } else { EMITTER_CHANNEL };
        if let Some(tp) = to_ps(t, duration_ps) {
            records.push(Record::new(ch, tp));
        }
    }
    for (&ch, &rate) in &channels.background_rates {
        if rate <= 0.0 {
            continue;
        }
        let mut rng = stage_rng(seed, Stage::Background(ch));
        let mean = rate * duration_ps as f64;
        let n = Poisson::new(mean).map(|p| p.sample(&mut rng) as u64).unwrap_or(0);
        for _ in 0..n {
            let t = rng.random_range(0..duration_ps);
            records.push(Record::new(ch, t));
        }
    }
    let meta = StreamMeta {
        duration_ps,
        seed: Some(seed),
        generator: None,
    };
    TimestampStream::from_records(records, meta)
}

pub(crate) fn to_ps(t: f64, duration_ps: u64) -> Option<u64> {
    let r = t.round();
    (r >= 0.0 && r < duration_ps as f64).then_some(r as u64)
}
