//! scan, saturation and tcspc: plot-ready tables from the analytic models.
//!
//! Measurement noise is relative and Gaussian, `y·(1 + f·N(0,1))` with
//! σ = f·y, drawn from the analysis-noise stage of the seed.

use std::fmt::Write as _;
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};

use super::analyze::FitReport;
use super::{write_output, CliError, CliResult, GenerateArgs, Recorder};
use crate::fitting::{fit as run_fit, fit_doublet_scan, initial_guess, FitProblem, ModelId};
use crate::io::ConfigFile;
use crate::physics::{
    detuned_intensity, power_broadened_fwhm, saturation_parameter, scan_spectrum, DriveParams, ScanOptions,
};
use crate::sim::{stage_rng, Stage};
use crate::units::frequency_ghz_to_energy;

/// Laser step of the detuning scans when none is configured [GHz].
const DEFAULT_STEP_GHZ: f64 = 0.27;
/// Floor of σ relative to f·max(y), so that zero model values keep a weight.
const SIGMA_FLOOR: f64 = 1e-6;

fn missing(section: &str) -> CliError {
    CliError::Usage(format!("config: {section}: section required"))
}

/// Noisy copy of `clean` and its σ; σ is 1 without noise.
fn add_noise(clean: &[f64], f: f64, seed: u64) -> CliResult<(Vec<f64>, Vec<f64>)> {
    if !(f >= 0.0) || !f.is_finite() {
        return Err(CliError::Usage(format!("config: noise_fraction: {f} must be finite and non-negative")));
    }
    if f == 0.0 {
        return Ok((clean.to_vec(), vec![1.0; clean.len()]));
    }
    let mut rng = stage_rng(seed, Stage::AnalysisNoise);
    let peak = clean.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let noisy = clean
        .iter()
        .map(|&v| {
            let n: f64 = StandardNormal.sample(&mut rng);
            v * (1.0 + f * n)
        })
        .collect();
    let sigma = clean.iter().map(|&v| (f * v.abs()).max(SIGMA_FLOOR * f * peak)).collect();
    Ok((noisy, sigma))
}

fn report_path(a: &GenerateArgs) -> Option<String> {
    a.report
        .clone()
        .or_else(|| (a.out != "-").then(|| format!("{}.fit.json", a.out)))
}

fn write_report(a: &GenerateArgs, rec: &mut Recorder, report: &FitReport) -> CliResult<()> {
    let json = report.to_json();
    match report_path(a) {
        Some(p) => {
            write_output(&p, json.as_bytes())?;
            rec.output(&p)?;
        }
        None => eprint!("{json}"),
    }
    Ok(())
}

fn begin(a: &GenerateArgs, command: &str, args: &[String]) -> CliResult<(ConfigFile, Recorder)> {
    let file = ConfigFile::load(&a.config)?;
    let mut rec = Recorder::new(command, args);
    rec.input(&a.config.display().to_string())?;
    Ok((file, rec))
}

pub(super) fn scan(a: &GenerateArgs, args: &[String]) -> CliResult<()> {
    let (file, mut rec) = begin(a, "scan", args)?;
    let sec = file.scan.clone().ok_or_else(|| missing("scan"))?;
    let e = file.emitter_params()?;
    let d = file.drive_params(&e)?;
    let base = a.config.parent().unwrap_or(Path::new("."));
    let ch = file.channel_model(base)?;
    let step = match (sec.step_ghz, sec.step_uev) {
        (Some(_), Some(_)) => return Err(CliError::Usage("config: scan: give at most one of step_ghz and step_uev".into())),
        (None, Some(s)) => s,
        (g, None) => frequency_ghz_to_energy(g.unwrap_or(DEFAULT_STEP_GHZ)),
    };
    if !(step > 0.0) || !(sec.detuning_max_uev > sec.detuning_min_uev) {
        return Err(CliError::Usage("config: scan: need step > 0 and detuning_max_uev > detuning_min_uev".into()));
    }
    let n = ((sec.detuning_max_uev - sec.detuning_min_uev) / step + 1e-9).floor() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| sec.detuning_min_uev + i as f64 * step).collect();
    let opts = ScanOptions {
        stray_light: sec.stray_light,
        resolution_uev: sec.resolution_uev,
        mode_detuning_uev: sec.mode_detuning_uev,
        display_points: sec.display_points,
    };
    if a.spectra.is_some() && !(sec.resolution_uev > 0.0 && sec.display_points >= 2) {
        return Err(CliError::Usage("config: scan.resolution_uev: --spectra needs a positive resolution and display_points >= 2".into()));
    }
    let r = scan_spectrum(&e, &d, &grid, &ch, &opts).map_err(|e| CliError::Usage(format!("config: scan: {e}")))?;
    let total: Vec<f64> = r.emitter.iter().zip(&r.mode).map(|(a, b)| a + b).collect();
    let seed = a.seed.unwrap_or(file.rng_seed);
    let (measured, sigma) = add_noise(&total, sec.noise_fraction, seed)?;

    let mut out = String::from("detuning_uev,emitter,mode,total,measured,sigma\n");
    for i in 0..grid.len() {
        writeln!(out, "{},{},{},{},{},{}", grid[i], r.emitter[i], r.mode[i], total[i], measured[i], sigma[i]).unwrap();
    }
    write_output(&a.out, out.as_bytes())?;
    rec.output(&a.out)?;

    if let (Some(path), Some(disp)) = (&a.spectra, &r.display) {
        let mut s = String::from("energy_uev");
        for d in &grid {
            write!(s, ",delta_{d}").unwrap();
        }
        s.push('\n');
        for (j, en) in disp.energy_uev.iter().enumerate() {
            write!(s, "{en}").unwrap();
            for row in &disp.rows {
                write!(s, ",{}", row[j]).unwrap();
            }
            s.push('\n');
        }
        write_output(path, s.as_bytes())?;
        rec.output(path)?;
    }

    if sec.fit {
        let report = if e.fss_splitting.is_some() {
            let f = fit_doublet_scan(&grid, &measured, &sigma, None)?;
            let mut rep = FitReport::new(&f.fit);
            rep.derived.insert("splitting_uev".into(), f.splitting_uev.into());
            rep.derived.insert("splitting_sigma_uev".into(), f.splitting_sigma_uev.into());
            rep.derived.insert("unresolved".into(), f.unresolved.into());
            rep
        } else {
            let id = ModelId::LorentzianSinglet;
            let init = initial_guess(id, &grid, &measured, 0.0);
            FitReport::new(&run_fit(&FitProblem::new(id, grid.clone(), measured.clone(), sigma.clone(), init))?)
        };
        write_report(a, &mut rec, &report)?;
    }
    rec.manifest_mut().config = serde_json::to_value(&file).map_err(|e| CliError::Runtime(e.to_string()))?;
    rec.manifest_mut().seed = Some(seed);
    rec.finish()
}

pub(super) fn saturation(a: &GenerateArgs, args: &[String]) -> CliResult<()> {
    let (file, mut rec) = begin(a, "saturation", args)?;
    let sec = file.saturation.clone().ok_or_else(|| missing("saturation"))?;
    let e = file.emitter_params()?;
    // Without a drive section one nW is s = 1.
    let reference = match &file.drive {
        Some(_) => file.drive_params(&e)?,
        None => DriveParams::new(1.0, 1.0 / (e.t1 * e.t2)).map_err(|e| CliError::Usage(e.to_string()))?,
    };
    let powers: Vec<f64> = match (&sec.s_grid, &sec.powers_nw) {
        (Some(s), None) => s.iter().map(|&s| s / (reference.beta * e.t1 * e.t2)).collect(),
        (None, Some(p)) => p.clone(),
        _ => return Err(CliError::Usage("config: saturation: give exactly one of s_grid and powers_nw".into())),
    };
    if let Some(bad) = powers.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
        return Err(CliError::Usage(format!("config: saturation: power {bad} must be finite and non-negative")));
    }
    let mut out = String::from("power_nw,saturation_parameter,rho_ee,intensity_fraction,fwhm_uev\n");
    for &p in &powers {
        let d = reference.with_power(p);
        let s = saturation_parameter(&e, &d);
        let rho = detuned_intensity(&e, &d);
        writeln!(out, "{p},{s},{rho},{},{}", 2.0 * rho, power_broadened_fwhm(&e, &d)).unwrap();
    }
    write_output(&a.out, out.as_bytes())?;
    rec.output(&a.out)?;
    rec.manifest_mut().config = serde_json::to_value(&file).map_err(|e| CliError::Runtime(e.to_string()))?;
    rec.finish()
}

pub(super) fn tcspc(a: &GenerateArgs, args: &[String]) -> CliResult<()> {
    let (file, mut rec) = begin(a, "tcspc", args)?;
    let sec = file.tcspc.clone().ok_or_else(|| missing("tcspc"))?;
    let e = file.emitter_params()?;
    if !(sec.bin_ps > 0.0) || !(sec.t_max_ps > sec.t_min_ps) {
        return Err(CliError::Usage("config: tcspc: need bin_ps > 0 and t_max_ps > t_min_ps".into()));
    }
    if !(sec.irf_fwhm_ps >= 0.0) {
        return Err(CliError::Usage("config: tcspc.irf_fwhm_ps: must be non-negative".into()));
    }
    let n = ((sec.t_max_ps - sec.t_min_ps) / sec.bin_ps + 1e-9).floor() as usize;
    let t: Vec<f64> = (0..=n).map(|i| sec.t_min_ps + i as f64 * sec.bin_ps).collect();
    let id = ModelId::TcspcDecayIrf;
    let truth = [sec.amplitude, e.t1, sec.t0_ps, sec.background, sec.irf_fwhm_ps];
    let clean: Vec<f64> = t.iter().map(|&x| id.model().value(x, &truth)).collect();
    let seed = a.seed.unwrap_or(file.rng_seed);
    let (measured, sigma) = add_noise(&clean, sec.noise_fraction, seed)?;

    let mut out = String::from("t_ps,decay,measured,sigma\n");
    for i in 0..t.len() {
        writeln!(out, "{},{},{},{}", t[i], clean[i], measured[i], sigma[i]).unwrap();
    }
    write_output(&a.out, out.as_bytes())?;
    rec.output(&a.out)?;

    if sec.fit {
        let mut init = initial_guess(id, &t, &measured, sec.irf_fwhm_ps);
        for (v, (lo, hi)) in init.iter_mut().zip(id.model().default_bounds()) {
            *v = v.clamp(lo, hi);
        }
        let mut p = FitProblem::new(id, t, measured, sigma, init);
        p.fixed[id.irf_index().expect("decay model carries an IRF")] = true;
        write_report(a, &mut rec, &FitReport::new(&run_fit(&p)?))?;
    }
    rec.manifest_mut().config = serde_json::to_value(&file).map_err(|e| CliError::Runtime(e.to_string()))?;
    rec.manifest_mut().seed = Some(seed);
    rec.finish()
}
