//! Histogram CSV.
//!
//! `#`-prefixed `key=value` metadata lines carry the request, the counts
//! and the integration time; the derived rates, Δt_int, Δt_MCA and the
//! Poisson level follow for readers that do not recompute them. The table
//! header is `tau_ps,raw,normalized,sigma`; the last two columns are empty
//! for a raw histogram. Floats are written in shortest round-trip form.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use super::IoError;
use crate::correlator::{CorrelationHistogram, CorrelationMode, CorrelationRequest};
use crate::units::ps_to_s;

const TITLE: &str = "# antibunch correlation histogram";
const HEADER: &str = "tau_ps,raw,normalized,sigma";
/// Written for reference, recomputed on read.
const DERIVED_KEYS: [&str; 5] = [
    "start_rate_per_s",
    "stop_rate_per_s",
    "integration_time_s",
    "mca_bin_s",
    "n_poisson",
];

pub fn write_histogram_csv<W: Write>(h: &CorrelationHistogram, mut w: W) -> Result<(), IoError> {
    let q = &h.request;
    let (ra, rb) = h.rates();
    writeln!(w, "{TITLE}")?;
    writeln!(w, "# start_channel={}", q.start_channel)?;
    writeln!(w, "# stop_channel={}", q.stop_channel)?;
    writeln!(w, "# mode={}", q.mode.as_str())?;
    writeln!(w, "# bin_width_ps={}", q.bin_width_ps)?;
    writeln!(w, "# tau_max_ps={}", q.tau_max_ps)?;
    writeln!(w, "# stop_delay_ps={}", q.stop_delay_ps)?;
    writeln!(w, "# start_counts={}", h.start_counts)?;
    writeln!(w, "# stop_counts={}", h.stop_counts)?;
    writeln!(w, "# duration_ps={}", h.duration_ps)?;
    if let Some((a, b)) = h.rate_override {
        writeln!(w, "# rate_override_per_s={a},{b}")?;
    }
    writeln!(w, "# start_rate_per_s={ra}")?;
    writeln!(w, "# stop_rate_per_s={rb}")?;
    writeln!(w, "# integration_time_s={}", h.integration_time_s())?;
    writeln!(w, "# mca_bin_s={}", ps_to_s(q.bin_width_ps as f64))?;
    writeln!(w, "# n_poisson={}", h.n_poisson())?;
    writeln!(w, "{HEADER}")?;
    for (i, tau) in h.tau_ps().into_iter().enumerate() {
        match (&h.normalized, &h.sigma) {
            (Some(n), Some(s)) => writeln!(w, "{tau},{},{},{}", h.raw[i], n[i], s[i])?,
            _ => writeln!(w, "{tau},{},,", h.raw[i])?,
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_histogram_csv<R: BufRead>(r: R) -> Result<CorrelationHistogram, IoError> {
    let mut meta: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut rows: Vec<(usize, String)> = Vec::new();
    let mut seen_header = false;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                meta.insert(k.trim().to_string(), (n, v.trim().to_string()));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if !seen_header {
            if line.trim() != HEADER {
                return Err(IoError::parse(n, format!("expected header '{HEADER}'")));
            }
            seen_header = true;
            continue;
        }
        rows.push((n, line));
    }
    if !seen_header {
        return Err(IoError::parse(1, format!("missing header '{HEADER}'")));
    }

    fn take<T: std::str::FromStr>(meta: &mut BTreeMap<String, (usize, String)>, key: &str) -> Result<T, IoError>
    where
        T::Err: std::fmt::Display,
    {
        let (line, v) = meta
            .remove(key)
            .ok_or_else(|| IoError::parse(0, format!("missing metadata '{key}'")))?;
        v.parse().map_err(|e| IoError::parse(line, format!("{key}: {e}")))
    }
    let mode: CorrelationMode = take(&mut meta, "mode")?;
    let request = CorrelationRequest::new(
        take(&mut meta, "start_channel")?,
        take(&mut meta, "stop_channel")?,
        take(&mut meta, "bin_width_ps")?,
        take(&mut meta, "tau_max_ps")?,
        mode,
    )
    .with_stop_delay(take(&mut meta, "stop_delay_ps")?);
    request
        .validate()
        .map_err(|e| IoError::parse(0, format!("histogram request: {e}")))?;
    let mut h = CorrelationHistogram::empty(request);
    h.start_counts = take(&mut meta, "start_counts")?;
    h.stop_counts = take(&mut meta, "stop_counts")?;
    h.duration_ps = take(&mut meta, "duration_ps")?;
    if let Some((line, v)) = meta.remove("rate_override_per_s") {
        let parsed = v
            .split_once(',')
            .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
        h.rate_override = Some(parsed.ok_or_else(|| IoError::parse(line, "rate_override_per_s: expected 'start,stop'"))?);
    }
    for k in DERIVED_KEYS {
        meta.remove(k);
    }
    if let Some((k, (line, _))) = meta.into_iter().next() {
        return Err(IoError::parse(line, format!("unknown metadata key '{k}'")));
    }

    let taus = h.tau_ps();
    if rows.len() != taus.len() {
        return Err(IoError::parse(
            rows.last().map_or(0, |r| r.0),
            format!("expected {} bins, found {}", taus.len(), rows.len()),
        ));
    }
    let mut normalized = Vec::with_capacity(rows.len());
    let mut sigma = Vec::with_capacity(rows.len());
    let mut any_norm = false;
    for (i, (n, line)) in rows.iter().enumerate() {
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 4 {
            return Err(IoError::parse(*n, "expected 4 columns"));
        }
        let tau: i64 = cols[0].parse().map_err(|e| IoError::parse(*n, format!("tau_ps: {e}")))?;
        if tau != taus[i] {
            return Err(IoError::parse(*n, format!("tau_ps {tau} is not bin centre {}", taus[i])));
        }
        h.raw[i] = cols[1].parse().map_err(|e| IoError::parse(*n, format!("raw: {e}")))?;
        let filled = !cols[2].is_empty();
        if i == 0 {
            any_norm = filled;
        }
        if filled != any_norm || cols[3].is_empty() == filled {
            return Err(IoError::parse(*n, "normalized and sigma must be filled on every row or none"));
        }
        if filled {
            normalized.push(cols[2].parse().map_err(|e| IoError::parse(*n, format!("normalized: {e}")))?);
            sigma.push(cols[3].parse().map_err(|e| IoError::parse(*n, format!("sigma: {e}")))?);
        }
    }
    if any_norm {
        h.normalized = Some(normalized);
        h.sigma = Some(sigma);
    }
    Ok(h)
}
