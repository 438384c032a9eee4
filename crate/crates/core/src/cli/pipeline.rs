//! simulate, correlate and normalize.

use std::path::Path;

use super::{read_input, write_output, CliError, CliResult, CorrelateArgs, NormalizeArgs, Recorder, SimulateArgs};
use crate::correlator::{correlate_parallel, poisson_normalize, thread_cap, CorrelationRequest};
use crate::io::{
    manifest_path, read_histogram_csv, read_timestamps, write_histogram_csv, write_timestamps_binary,
    write_timestamps_csv, ConfigFile, RunManifest, TimestampFormat,
};
use crate::sim::simulate as run_simulation;

pub(super) fn simulate(a: &SimulateArgs, args: &[String]) -> CliResult<()> {
    let mut rec = Recorder::new("simulate", args);
    let file = ConfigFile::load(&a.config)?;
    let base = a.config.parent().unwrap_or(Path::new("."));
    let cfg = file.sim_config(base, a.seed)?;
    rec.input(&a.config.display().to_string())?;
    let stream = run_simulation(&cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    log::info!("{} records over {} ps", stream.len(), cfg.duration_ps);

    let format = match a.format.as_deref() {
        Some("csv") => TimestampFormat::Csv,
        Some(_) => TimestampFormat::Binary,
        None => TimestampFormat::from_path(&a.out),
    };
    let mut bytes = Vec::new();
    match format {
        TimestampFormat::Binary => write_timestamps_binary(&stream, &mut bytes)?,
        TimestampFormat::Csv => write_timestamps_csv(&stream, &mut bytes)?,
    }
    write_output(&a.out, &bytes)?;
    rec.output(&a.out)?;
    let m = rec.manifest_mut();
    let mut resolved = file.clone();
    resolved.rng_seed = cfg.rng_seed;
    resolved.dt_ps = Some(cfg.dt_ps);
    m.config = serde_json::to_value(&resolved).map_err(|e| CliError::Runtime(e.to_string()))?;
    m.seed = Some(cfg.rng_seed);
    m.duration_ps = Some(cfg.duration_ps);
    rec.finish()
}

/// Explicit value, else the manifest written next to the input.
fn stream_duration(input: &str, explicit: Option<u64>) -> Option<u64> {
    if explicit.is_some() || input == "-" {
        return explicit;
    }
    let mp = manifest_path(Path::new(input));
    if !mp.exists() {
        return None;
    }
    match RunManifest::load(&mp) {
        Ok(m) => m.duration_ps,
        Err(e) => {
            log::warn!("ignoring {}: {e}", mp.display());
            None
        }
    }
}

pub(super) fn correlate(a: &CorrelateArgs, args: &[String]) -> CliResult<()> {
    let mut rec = Recorder::new("correlate", args);
    let req = CorrelationRequest::new(a.start_ch, a.stop_ch, a.bin_ps, a.window_ps, a.mode).with_stop_delay(a.stop_delay_ps);
    req.validate()?;
    let bytes = read_input(&a.input)?;
    let mut stream = read_timestamps(bytes.as_slice()).map_err(|e| CliError::Runtime(format!("{}: {e}", a.input)))?;
    rec.input(&a.input)?;
    let duration = stream_duration(&a.input, a.duration_ps);
    match duration {
        Some(d) => stream.meta.duration_ps = d,
        None => log::warn!("integration time unknown; using the span of the stream"),
    }
    let segments = a
        .segments
        .unwrap_or_else(|| thread_cap().unwrap_or_else(rayon::current_num_threads));
    let mut h = correlate_parallel(&stream, &req, segments)?;
    if !a.raw {
        h = poisson_normalize(&h)?;
    }
    let mut out = Vec::new();
    write_histogram_csv(&h, &mut out)?;
    write_output(&a.out, &out)?;
    rec.output(&a.out)?;
    let m = rec.manifest_mut();
    m.config = serde_json::json!({
        "request": req,
        "duration_ps": h.duration_ps,
        "normalized": !a.raw,
    });
    rec.finish()
}

pub(super) fn normalize(a: &NormalizeArgs, args: &[String]) -> CliResult<()> {
    let mut rec = Recorder::new("normalize", args);
    let bytes = read_input(&a.input)?;
    let mut h = read_histogram_csv(bytes.as_slice()).map_err(|e| CliError::Runtime(format!("{}: {e}", a.input)))?;
    rec.input(&a.input)?;
    if let Some(r) = &a.rates_per_s {
        h.rate_override = Some((r[0], r[1]));
    }
    let h = poisson_normalize(&h)?;
    let mut out = Vec::new();
    write_histogram_csv(&h, &mut out)?;
    write_output(&a.out, &out)?;
    rec.output(&a.out)?;
    rec.manifest_mut().config = serde_json::json!({ "rate_override_per_s": h.rate_override });
    rec.finish()
}
