//! Timestamp stream files.
//!
//! Binary layout, little-endian:
//!
//! ```text
//! "ABT1" | u16 version | u16 channel count | { u8 channel, u64 time_ps }*
//! ```
//!
//! The CSV form has the header `channel,t_ps` and one record per line.
//! Neither form stores the integration time; readers leave
//! `meta.duration_ps` at zero.

use std::io::{BufRead, Read, Write};

use super::IoError;
use crate::sim::{Record, StreamMeta, TimestampStream};

pub const BINARY_MAGIC: [u8; 4] = *b"ABT1";
pub const BINARY_VERSION: u16 = 1;
const RECORD_BYTES: usize = 9;
const CSV_HEADER: &str = "channel,t_ps";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimestampFormat {
    Binary,
    Csv,
}

impl TimestampFormat {
    /// `.csv` selects CSV, anything else the binary form.
    pub fn from_path(path: &str) -> Self {
        if path.to_ascii_lowercase().ends_with(".csv") {
            TimestampFormat::Csv
        } else {
            TimestampFormat::Binary
        }
    }
}

pub fn write_timestamps_binary<W: Write>(stream: &TimestampStream, mut w: W) -> Result<(), IoError> {
    let channels = stream.channel_counts().len() as u16;
    w.write_all(&BINARY_MAGIC)?;
    w.write_all(&BINARY_VERSION.to_le_bytes())?;
    w.write_all(&channels.to_le_bytes())?;
    let mut buf = [0u8; RECORD_BYTES];
    for r in stream.records() {
        buf[0] = r.channel;
        buf[1..].copy_from_slice(&r.time_ps.to_le_bytes());
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_timestamps_binary<R: Read>(mut r: R) -> Result<TimestampStream, IoError> {
    let mut head = [0u8; 8];
    r.read_exact(&mut head).map_err(|_| IoError::BadMagic)?;
    if head[..4] != BINARY_MAGIC {
        return Err(IoError::BadMagic);
    }
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    binary_body(&head, &bytes)
}

fn binary_body(head: &[u8; 8], bytes: &[u8]) -> Result<TimestampStream, IoError> {
    let version = u16::from_le_bytes([head[4], head[5]]);
    if version != BINARY_VERSION {
        return Err(IoError::UnsupportedVersion(version));
    }
    let declared = u16::from_le_bytes([head[6], head[7]]);
    if bytes.len() % RECORD_BYTES != 0 {
        return Err(IoError::Truncated(bytes.len() / RECORD_BYTES));
    }
    let records: Vec<Record> = bytes
        .chunks_exact(RECORD_BYTES)
        .map(|c| Record::new(c[0], u64::from_le_bytes(c[1..].try_into().expect("8-byte slice"))))
        .collect();
    let stream = sorted(records)?;
    let found = stream.channel_counts().len();
    if found != declared as usize {
        return Err(IoError::ChannelCount { declared, found });
    }
    Ok(stream)
}

fn sorted(records: Vec<Record>) -> Result<TimestampStream, IoError> {
    if let Some(i) = records.windows(2).position(|w| w[1].time_ps < w[0].time_ps) {
        return Err(IoError::Unsorted(i + 1));
    }
    // Equal times keep file order; canonicalise ties by channel.
    Ok(TimestampStream::from_records(records, StreamMeta::default()))
}

pub fn write_timestamps_csv<W: Write>(stream: &TimestampStream, mut w: W) -> Result<(), IoError> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in stream.records() {
        writeln!(w, "{},{}", r.channel, r.time_ps)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_timestamps_csv<R: BufRead>(r: R) -> Result<TimestampStream, IoError> {
    let mut records = Vec::new();
    let mut seen_header = false;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_header {
            if line != CSV_HEADER {
                return Err(IoError::parse(i + 1, format!("expected header '{CSV_HEADER}'")));
            }
            seen_header = true;
            continue;
        }
        let (ch, t) = line
            .split_once(',')
            .ok_or_else(|| IoError::parse(i + 1, "expected 'channel,t_ps'"))?;
        let ch: u8 = ch.trim().parse().map_err(|e| IoError::parse(i + 1, format!("channel: {e}")))?;
        let t: u64 = t.trim().parse().map_err(|e| IoError::parse(i + 1, format!("t_ps: {e}")))?;
        records.push(Record::new(ch, t));
    }
    if !seen_header {
        return Err(IoError::parse(1, format!("expected header '{CSV_HEADER}'")));
    }
    sorted(records)
}

/// Reads either form, recognising the binary magic.
pub fn read_timestamps<R: Read>(mut r: R) -> Result<TimestampStream, IoError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.starts_with(&BINARY_MAGIC) {
        let head: [u8; 8] = bytes.get(..8).ok_or(IoError::BadMagic)?.try_into().expect("8-byte slice");
        binary_body(&head, &bytes[8..])
    } else {
        read_timestamps_csv(bytes.as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream() -> TimestampStream {
        let recs = vec![
            Record::new(0, 5),
            Record::new(1, 5),
            Record::new(3, 17),
            Record::new(0, u64::MAX),
        ];
        TimestampStream::from_sorted(recs, StreamMeta::default()).unwrap()
    }

    #[test]
    fn binary_layout() {
        let mut buf = Vec::new();
        write_timestamps_binary(&stream(), &mut buf).unwrap();
        assert_eq!(&buf[..4], b"ABT1");
        assert_eq!(&buf[4..8], &[1, 0, 3, 0]);
        assert_eq!(buf.len(), 8 + 4 * 9);
        assert_eq!(&buf[8 + 18..8 + 27], &[3, 17, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(read_timestamps_binary(buf.as_slice()).unwrap(), stream());
        assert_eq!(read_timestamps(buf.as_slice()).unwrap(), stream());
    }

    #[test]
    fn csv_form() {
        let mut buf = Vec::new();
        write_timestamps_csv(&stream(), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("channel,t_ps\n0,5\n1,5\n"));
        assert_eq!(read_timestamps(buf.as_slice()).unwrap(), stream());
    }

    #[test]
    fn unsorted_and_malformed_input_rejected() {
        assert!(matches!(
            read_timestamps_csv("channel,t_ps\n0,10\n1,4\n".as_bytes()),
            Err(IoError::Unsorted(1))
        ));
        assert!(matches!(read_timestamps_csv("0,10\n".as_bytes()), Err(IoError::Parse { line: 1, .. })));
        assert!(matches!(read_timestamps_csv("channel,t_ps\n0,-3\n".as_bytes()), Err(IoError::Parse { line: 2, .. })));
        let mut buf = Vec::new();
        write_timestamps_binary(&stream(), &mut buf).unwrap();
        buf.pop();
        assert!(matches!(read_timestamps(buf.as_slice()), Err(IoError::Truncated(_))));
        buf[4] = 9;
        assert!(matches!(read_timestamps_binary(buf.as_slice()), Err(IoError::UnsupportedVersion(9))));
    }

    #[test]
    fn empty_stream_is_valid() {
        let mut buf = Vec::new();
        write_timestamps_binary(&TimestampStream::default(), &mut buf).unwrap();
        assert_eq!(buf.len(), 8);
        assert!(read_timestamps(buf.as_slice()).unwrap().is_empty());
    }
}
