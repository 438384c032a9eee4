use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// One detection: channel id and time in integer picoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Record {
    pub time_ps: u64,
    pub channel: u8,
}

impl Record {
    pub fn new(channel: u8, time_ps: u64) -> Self {
        Record { time_ps, channel }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StreamMeta {
    /// Acquisition length [ps]; records lie in `[0, duration_ps)`.
    pub duration_ps: u64,
    pub seed: Option<u64>,
    /// Free-form description of the generating parameters.
    pub generator: Option<String>,
}

/// Time-ordered photon detection records.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimestampStream {
    records: Vec<Record>,
    pub meta: StreamMeta,
}

impl TimestampStream {
    /// Builds a stream, sorting records by (time, channel).
    pub fn from_records(mut records: Vec<Record>, meta: StreamMeta) -> Self {
        records.sort_unstable();
        TimestampStream { records, meta }
    }

    /// Wraps records that the caller guarantees are already ordered.
    pub fn from_sorted(records: Vec<Record>, meta: StreamMeta) -> Option<Self> {
        if records.windows(2).any(|w| w[1].time_ps < w[0].time_ps) {
            return None;
        }
        Some(TimestampStream { records, meta })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn into_records(self) -> Vec<Record> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn duration_ps(&self) -> u64 {
        self.meta.duration_ps
    }

    pub fn channel_counts(&self) -> BTreeMap<u8, u64> {
        let mut counts = BTreeMap::new();
        for r in &self.records {
            *counts.entry(r.channel).or_insert(0) += 1;
        }
        counts
    }

    /// Times on one channel, in stream order.
    pub fn times(&self, channel: u8) -> Vec<u64> {
        self.records
            .iter()
            .filter(|r| r.channel == channel)
            .map(|r| r.time_ps)
            .collect()
    }

    pub fn is_sorted(&self) -> bool {
        self.records.windows(2).all(|w| w[0].time_ps <= w[1].time_ps)
    }

    /// Index of the first out-of-order record, if any.
    pub fn first_unsorted(&self) -> Option<usize> {
        self.records
            .windows(2)
            .position(|w| w[1].time_ps < w[0].time_ps)
            .map(|i| i + 1)
    }

    /// Replaces all records on `channel` with `times` and re-sorts.
    pub fn replace_channel(&mut self, channel: u8, times: &[u64]) {
        self.records.retain(|r| r.channel != channel);
        self.records.extend(times.iter().map(|&t| Record::new(channel, t)));
        self.records.sort_unstable();
    }

    pub fn remove_channel(&mut self, channel: u8) {
        self.records.retain(|r| r.channel != channel);
    }
}

/// Merges per-channel time lists into one ordered stream.
pub fn merge_channels<'a, I>(channels: I, meta: StreamMeta) -> TimestampStream
where
    I: IntoIterator<Item = (u8, &'a [u64])>,
{
    let mut records = Vec::new();
    for (ch, times) in channels {
        records.extend(times.iter().map(|&t| Record::new(ch, t)));
    }
    TimestampStream::from_records(records, meta)
}
