//! fit: a registered model against a histogram or a table.

use serde::Serialize;

use super::{read_input, write_output, CliError, CliResult, FitArgs, Recorder};
use crate::fitting::{
    extract_g2_zero, fit as run_fit, initial_guess, Degeneracy, FitProblem, FitResult, G2ZeroOptions, G2ZeroReport,
    IrfSensitivity, ModelId, Termination,
};
use crate::io::read_histogram_csv;
use crate::physics::IrfParams;

#[derive(Debug, Serialize)]
pub(crate) struct ParameterReport {
    pub name: String,
    pub value: f64,
    /// 1σ; `null` for a fixed or degenerate parameter.
    pub error: Option<f64>,
    pub fixed: bool,
}

#[derive(Debug, Serialize)]
pub(crate) struct G2ZeroSummary {
    pub convolved: f64,
    pub convolved_sigma: f64,
    pub deconvolved: f64,
    pub deconvolved_sigma: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub irf_sensitivity: Vec<IrfSensitivity>,
}

/// Serialised fit outcome.
#[derive(Debug, Serialize)]
pub(crate) struct FitReport {
    pub model: String,
    pub parameters: Vec<ParameterReport>,
    pub chi2: f64,
    pub dof: usize,
    pub reduced_chi2: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degeneracy: Option<Degeneracy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g2_zero: Option<G2ZeroSummary>,
    /// Derived quantities such as a doublet splitting.
    #[serde(skip_serializing_if = "serde_json::Map::is_empty")]
    pub derived: serde_json::Map<String, serde_json::Value>,
}

impl FitReport {
    pub(crate) fn new(r: &FitResult) -> Self {
        let parameters = r
            .param_names
            .iter()
            .enumerate()
            .map(|(i, n)| ParameterReport {
                name: n.clone(),
                value: r.params[i],
                error: (!r.fixed[i] && r.errors[i].is_finite()).then_some(r.errors[i]),
                fixed: r.fixed[i],
            })
            .collect();
        FitReport {
            model: r.model.clone(),
            parameters,
            chi2: r.chi2,
            dof: r.dof,
            reduced_chi2: r.reduced_chi2(),
            iterations: r.iterations,
            converged: r.converged,
            termination: r.termination,
            degeneracy: r.degeneracy.clone(),
            g2_zero: None,
            derived: serde_json::Map::new(),
        }
    }

    fn with_g2(r: &G2ZeroReport) -> Self {
        let mut rep = FitReport::new(&r.fit);
        rep.g2_zero = Some(G2ZeroSummary {
            convolved: r.convolved,
            convolved_sigma: r.convolved_sigma,
            deconvolved: r.deconvolved,
            deconvolved_sigma: r.deconvolved_sigma,
            irf_sensitivity: r.irf_sensitivity.clone(),
        });
        rep
    }

    pub(crate) fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }
}

fn parse_init(model: ModelId, init: &[String]) -> CliResult<Vec<(usize, f64)>> {
    init.iter()
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--init expects name=value, got '{kv}'")))?;
            let i = model
                .param_index(k.trim())
                .ok_or_else(|| CliError::Usage(format!("unknown parameter '{k}' for {model}; expected one of {:?}", model.param_names())))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|e| CliError::Usage(format!("--init {k}: {e}")))?;
            Ok((i, v))
        })
        .collect()
}

fn parse_fix(model: ModelId, fix: &[String]) -> CliResult<Vec<bool>> {
    let mut fixed = vec![false; model.param_names().len()];
    for name in fix {
        let i = model
            .param_index(name.trim())
            .ok_or_else(|| CliError::Usage(format!("unknown parameter '{name}' for {model}; expected one of {:?}", model.param_names())))?;
        fixed[i] = true;
    }
    Ok(fixed)
}

/// Columns x, y and optionally σ of a CSV table with a header line.
fn read_table(text: &str) -> CliResult<(Vec<f64>, Vec<f64>, Option<Vec<f64>>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    lines.next().ok_or_else(|| CliError::Runtime("table is empty".into()))?;
    let (mut x, mut y, mut s) = (Vec::new(), Vec::new(), Vec::new());
    let mut with_sigma = None;
    for (n, line) in lines {
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let num = |c: &str| {
            c.parse::<f64>()
                .map_err(|e| CliError::Runtime(format!("line {}: '{c}': {e}", n + 1)))
        };
        if cols.len() < 2 {
            return Err(CliError::Runtime(format!("line {}: need at least x and y", n + 1)));
        }
        let has = cols.len() >= 3 && !cols[2].is_empty();
        if *with_sigma.get_or_insert(has) != has {
            return Err(CliError::Runtime(format!("line {}: sigma must be given on every row or none", n + 1)));
        }
        x.push(num(cols[0])?);
        y.push(num(cols[1])?);
        if has {
            s.push(num(cols[2])?);
        }
    }
    Ok((x, y, with_sigma.unwrap_or(false).then_some(s)))
}

fn is_histogram(text: &str) -> bool {
    text.lines().any(|l| l.trim() == "tau_ps,raw,normalized,sigma")
}

pub(super) fn fit(a: &FitArgs, args: &[String]) -> CliResult<()> {
    let mut rec = Recorder::new("fit", args);
    let bytes = read_input(&a.input)?;
    let text = String::from_utf8(bytes).map_err(|_| CliError::Runtime(format!("{}: not UTF-8 text", a.input)))?;
    rec.input(&a.input)?;
    let model = a.model;
    let init = parse_init(model, &a.init)?;
    let fixed = parse_fix(model, &a.fix)?;
    let irf_index = model.irf_index();
    let irf_fwhm = a
        .irf_fwhm_ps
        .or_else(|| irf_index.and_then(|k| init.iter().find(|(i, _)| *i == k).map(|&(_, v)| v)));

    let report = if is_histogram(&text) {
        let h = read_histogram_csv(text.as_bytes()).map_err(|e| CliError::Runtime(format!("{}: {e}", a.input)))?;
        if matches!(model, ModelId::G2BackgroundIrf | ModelId::G2ResonantWeakIrf) {
            let fwhm = irf_fwhm.ok_or_else(|| CliError::Usage(format!("{model} needs --irf-fwhm-ps")))?;
            let irf = IrfParams::new(fwhm).map_err(|e| CliError::Usage(e.to_string()))?;
            let initial = if init.is_empty() {
                None
            } else {
                let (x, y) = histogram_xy(&h)?;
                let mut p = initial_guess(model, &x, &y, fwhm);
                init.iter().for_each(|&(i, v)| p[i] = v);
                Some(p)
            };
            let opts = G2ZeroOptions {
                initial,
                tau_max_ps: a.tau_max_ps,
                irf_sensitivity: a.irf_sensitivity,
                fixed,
            };
            FitReport::with_g2(&extract_g2_zero(&h, model, irf, &opts)?)
        } else {
            let (x, y) = histogram_xy(&h)?;
            let sigma = h.sigma.clone().expect("normalized histograms carry sigma");
            let keep: Vec<usize> = (0..x.len())
                .filter(|&i| a.tau_max_ps.is_none_or(|m| x[i].abs() <= m))
                .collect();
            let pick = |v: &[f64]| keep.iter().map(|&i| v[i]).collect::<Vec<f64>>();
            generic(model, pick(&x), pick(&y), pick(&sigma), &init, fixed, irf_fwhm)?
        }
    } else {
        let (x, y, sigma) = read_table(&text)?;
        let sigma = sigma.unwrap_or_else(|| {
            log::warn!("no sigma column: fitting with unit weights");
            vec![1.0; x.len()]
        });
        generic(model, x, y, sigma, &init, fixed, irf_fwhm)?
    };
    write_output(&a.out, report.to_json().as_bytes())?;
    rec.output(&a.out)?;
    rec.manifest_mut().config = serde_json::json!({
        "model": model,
        "init": a.init,
        "fix": a.fix,
        "irf_fwhm_ps": irf_fwhm,
        "tau_max_ps": a.tau_max_ps,
        "irf_sensitivity": a.irf_sensitivity,
    });
    rec.finish()
}

fn histogram_xy(h: &crate::correlator::CorrelationHistogram) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let y = h
        .normalized
        .clone()
        .ok_or_else(|| CliError::Runtime("histogram is raw; run normalize first".into()))?;
    Ok((h.tau_ps().into_iter().map(|t| t as f64).collect(), y))
}

/// Sorts by x, starts from the heuristic guess with the overrides applied
/// and holds the IRF width fixed when one is given.
fn generic(
    model: ModelId,
    x: Vec<f64>,
    y: Vec<f64>,
    sigma: Vec<f64>,
    init: &[(usize, f64)],
    mut fixed: Vec<bool>,
    irf_fwhm: Option<f64>,
) -> CliResult<FitReport> {
    if x.len() != y.len() || x.len() != sigma.len() || x.is_empty() {
        return Err(CliError::Runtime("table has no usable rows".into()));
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let x: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let y: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let sigma: Vec<f64> = order.iter().map(|&i| sigma[i]).collect();
    let mut p = initial_guess(model, &x, &y, irf_fwhm.unwrap_or(0.0));
    if let (Some(k), Some(w)) = (model.irf_index(), irf_fwhm) {
        p[k] = w;
        fixed[k] = true;
    }
    // Guesses are clamped into bounds; explicit starting values are not.
    for (v, (lo, hi)) in p.iter_mut().zip(model.model().default_bounds()) {
        *v = v.clamp(lo, hi);
    }
    init.iter().for_each(|&(i, v)| p[i] = v);
    let mut fp = FitProblem::new(model, x, y, sigma, p);
    fp.fixed = fixed;
    Ok(FitReport::new(&run_fit(&fp)?))
}
