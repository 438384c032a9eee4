use serde::{Deserialize, Serialize};

use super::engine::{solve, FitOptions, FitResult, Problem};
use super::guess::initial_guess;
use super::models::{Model, ModelId, PowerObservable, PowerSeriesModel};
use super::{FitError, FitProblem};
use crate::correlator::CorrelationHistogram;
use crate::physics::IrfParams;
use crate::units::HBAR_UEV_PS;

/// Doublet fit with the derived splitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubletFit {
    pub fit: FitResult,
    /// |c₂ − c₁| [µeV].
    pub splitting_uev: f64,
    pub splitting_sigma_uev: f64,
    /// Splitting below a quarter of the fitted FWHM.
    pub unresolved: bool,
}

/// Two Lorentzians with a common width on a constant background.
///
/// Without an explicit start the centres come from the two highest local
/// maxima of the (lightly smoothed) scan.
pub fn fit_doublet_scan(x: &[f64], y: &[f64], sigma: &[f64], initial: Option<&[f64]>) -> Result<DoubletFit, FitError> {
    let id = ModelId::LorentzianDoublet;
    let (xs, ys, ss) = sorted_by_x(x, y, sigma)?;
    let init = match initial {
        Some(p) => p.to_vec(),
        None => initial_guess(id, &xs, &ys, 0.0),
    };
    let fit = super::fit(&FitProblem::new(id, xs, ys, ss, init))?;
    let (c1, c2) = (1, 3);
    let split = (fit.params[c2] - fit.params[c1]).abs();
    let cov = &fit.covariance;
    let var = cov[c1][c1] + cov[c2][c2] - 2.0 * cov[c1][c2];
    let mut sigma_split = var.max(0.0).sqrt();
    if fit.errors[c1].is_infinite() || fit.errors[c2].is_infinite() {
        sigma_split = f64::INFINITY;
    }
    let unresolved = split < 0.25 * fit.params[4];
    Ok(DoubletFit {
        fit,
        splitting_uev: split,
        splitting_sigma_uev: sigma_split,
        unresolved,
    })
}

fn sorted_by_x(x: &[f64], y: &[f64], s: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), FitError> {
    if x.len() != y.len() || x.len() != s.len() {
        return Err(FitError::LengthMismatch {
            x: x.len(),
            y: y.len(),
            sigma: s.len(),
        });
    }
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    Ok((
        idx.iter().map(|&i| x[i]).collect(),
        idx.iter().map(|&i| y[i]).collect(),
        idx.iter().map(|&i| s[i]).collect(),
    ))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct G2ZeroOptions {
    /// Starting point; the model heuristic is used when absent.
    pub initial: Option<Vec<f64>>,
    /// Fit only bins with |τ| ≤ this value [ps].
    pub tau_max_ps: Option<f64>,
    /// Also refit with the IRF width at 0.9× and 1.1×.
    pub irf_sensitivity: bool,
    /// Parameters held at their initial value in addition to the IRF width.
    #[serde(default)]
    pub fixed: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrfSensitivity {
    pub irf_fwhm_ps: f64,
    pub convolved: f64,
    pub deconvolved: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2ZeroReport {
    pub model: ModelId,
    /// Fitted model including the IRF, at τ = 0.
    pub convolved: f64,
    pub convolved_sigma: f64,
    /// Same parameters with an ideal response, at τ = 0.
    pub deconvolved: f64,
    pub deconvolved_sigma: f64,
    pub fit: FitResult,
    pub irf_sensitivity: Vec<IrfSensitivity>,
}

/// Fits an IRF-convolved g² model to a normalised histogram with the IRF
/// width held at `irf`, then reports the model at τ = 0 with and without the
/// IRF. Uncertainties come from the fit covariance by linear propagation.
pub fn extract_g2_zero(
    h: &CorrelationHistogram,
    model: ModelId,
    irf: IrfParams,
    opts: &G2ZeroOptions,
) -> Result<G2ZeroReport, FitError> {
    let irf_index = match model {
        ModelId::G2BackgroundIrf | ModelId::G2ResonantWeakIrf => model.irf_index().expect("g2 models carry an IRF"),
        other => return Err(FitError::NotAG2Model(other)),
    };
    let (Some(norm), Some(sig)) = (&h.normalized, &h.sigma) else {
        return Err(FitError::NotNormalized);
    };
    let reach = opts.tau_max_ps.unwrap_or(f64::INFINITY);
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut s = Vec::new();
    for ((tau, &v), &e) in h.tau_ps().into_iter().zip(norm).zip(sig) {
        if (tau as f64).abs() <= reach {
            x.push(tau as f64);
            y.push(v);
            s.push(e);
        }
    }
    let run = |fwhm: f64| -> Result<(FitResult, f64, f64, f64, f64), FitError> {
        let mut init = match &opts.initial {
            Some(p) => p.clone(),
            None => initial_guess(model, &x, &y, fwhm),
        };
        init[irf_index] = fwhm;
        let mut p = FitProblem::new(model, x.clone(), y.clone(), s.clone(), init);
        p.fixed[irf_index] = true;
        for (f, &extra) in p.fixed.iter_mut().zip(&opts.fixed) {
            *f |= extra;
        }
        for (v, &(lo, hi)) in p.initial.iter_mut().zip(&p.bounds) {
            *v = v.clamp(lo, hi);
        }
        let fit = super::fit(&p)?;
        let m = model.model();
        let (c, cs) = value_with_error(m, &fit, &fit.params);
        let mut ideal = fit.params.clone();
        ideal[irf_index] = 0.0;
        let (d, ds) = value_with_error(m, &fit, &ideal);
        Ok((fit, c, cs, d, ds))
    };
    let (fit, convolved, convolved_sigma, deconvolved, deconvolved_sigma) = run(irf.fwhm)?;
    let mut irf_sensitivity = Vec::new();
    if opts.irf_sensitivity {
        for f in [0.9, 1.1] {
            let fwhm = irf.fwhm * f;
            let (_, c, _, d, _) = run(fwhm)?;
            irf_sensitivity.push(IrfSensitivity {
                irf_fwhm_ps: fwhm,
                convolved: c,
                deconvolved: d,
            });
        }
    }
    Ok(G2ZeroReport {
        model,
        convolved,
        convolved_sigma,
        deconvolved,
        deconvolved_sigma,
        fit,
        irf_sensitivity,
    })
}

/// Model value at τ = 0 for `params` and its σ from the fit covariance.
fn value_with_error(m: &dyn Model, fit: &FitResult, params: &[f64]) -> (f64, f64) {
    let v = m.value(0.0, params);
    let mut g = vec![0.0; params.len()];
    m.gradient(0.0, params, &mut g);
    let np = params.len();
    let mut var = 0.0;
    for a in 0..np {
        for b in 0..np {
            var += g[a] * fit.covariance[a][b] * g[b];
        }
    }
    (v, var.max(0.0).sqrt())
}

/// Measurements against excitation power [nW].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PowerSeries {
    pub powers_nw: Vec<f64>,
    /// (value, σ) per power.
    pub intensities: Option<Vec<(f64, f64)>>,
    /// Power-broadened FWHM [µeV] and σ per power.
    pub linewidths_uev: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSeriesFit {
    /// Parameters t1_ps, t2_ps, beta, amplitude.
    pub fit: FitResult,
    /// Zero-power linewidth 2ħ/T₂ [µeV] and σ.
    pub gamma0_uev: (f64, f64),
    /// Power at s = 1 [nW] and σ.
    pub saturation_power_nw: (f64, f64),
    /// T₁ and T₂ are not separately constrained by the data supplied.
    pub t1_t2_degenerate: bool,
}

/// Power series of points needed before a fit is attempted.
pub const MIN_POWER_POINTS: usize = 4;

/// Joint fit of the saturation curve A·½s/(1+s) and the broadened width
/// (2ħ/T₂)·√(1+s), s = β·P·T₁·T₂, to whichever data are present.
///
/// Intensities alone fix only A and the product β·T₁·T₂; widths fix T₂ and
/// β·T₁. Unconstrained combinations are reported through the degeneracy of
/// the fit rather than as an error.
pub fn fit_power_series(series: &PowerSeries, initial: [f64; 4], fixed: [bool; 4]) -> Result<PowerSeriesFit, FitError> {
    let n = series.powers_nw.len();
    if n < MIN_POWER_POINTS {
        return Err(FitError::InsufficientPowerPoints {
            needed: MIN_POWER_POINTS,
            got: n,
        });
    }
    let mut powers = Vec::new();
    let mut kinds = Vec::new();
    let mut y = Vec::new();
    let mut s = Vec::new();
    for (data, kind) in [
        (&series.intensities, PowerObservable::Intensity),
        (&series.linewidths_uev, PowerObservable::Linewidth),
    ] {
        if let Some(d) = data {
            if d.len() != n {
                return Err(FitError::LengthMismatch { x: n, y: d.len(), sigma: d.len() });
            }
            for (&p, &(v, e)) in series.powers_nw.iter().zip(d) {
                powers.push(p);
                kinds.push(kind);
                y.push(v);
                s.push(e);
            }
        }
    }
    let has_intensity = series.intensities.is_some();
    let mut fixed = fixed;
    if !has_intensity {
        // The amplitude does not enter linewidth data.
        fixed[3] = true;
    }
    let model = PowerSeriesModel { powers, kinds };
    let x: Vec<f64> = (0..y.len()).map(|i| i as f64).collect();
    let bounds = model.default_bounds();
    let fit = solve(
        &Problem {
            model: &model,
            x: &x,
            y: &y,
            sigma: &s,
            initial: &initial,
            bounds: &bounds,
            fixed: &fixed,
        },
        &FitOptions::default(),
    )?;
    let (t1, t2, beta) = (fit.params[0], fit.params[1], fit.params[2]);
    let gamma0 = 2.0 * HBAR_UEV_PS / t2;
    let gamma0_sigma = gamma0 / t2 * fit.errors[1];
    // P_sat = 1/(β T₁ T₂); relative errors through the covariance.
    let psat = 1.0 / (beta * t1 * t2);
    let g = [-psat / t1, -psat / t2, -psat / beta];
    let mut var = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            var += g[a] * fit.covariance[a][b] * g[b];
        }
    }
    let t1_t2_degenerate = fit
        .degeneracy
        .as_ref()
        .is_some_and(|d| d.parameters.iter().any(|p| p == "t1_ps" || p == "t2_ps"));
    Ok(PowerSeriesFit {
        gamma0_uev: (gamma0, gamma0_sigma),
        saturation_power_nw: (psat, var.max(0.0).sqrt()),
        t1_t2_degenerate,
        fit,
    })
}
