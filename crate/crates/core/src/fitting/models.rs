//! Registered fit models with analytic parameter gradients.

use serde::{Deserialize, Serialize};

use crate::physics::convolution::{HalfExpGauss, TwoSidedExpGauss};
use crate::physics::EQUAL_TIMES_RTOL;
use crate::units::{fwhm_to_sigma, FWHM_PER_SIGMA, HBAR_UEV_PS};

/// A scalar model y = f(x; p).
pub trait Model: Sync {
    fn name(&self) -> &str;

    fn param_names(&self) -> &[&'static str];

    fn value(&self, x: f64, p: &[f64]) -> f64;

    /// Writes ∂f/∂p into `out`; returns false when no analytic gradient exists.
    fn gradient(&self, _x: f64, _p: &[f64], _out: &mut [f64]) -> bool {
        false
    }

    /// Box constraints per parameter.
    fn default_bounds(&self) -> Vec<(f64, f64)> {
        vec![(f64::NEG_INFINITY, f64::INFINITY); self.param_names().len()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelId {
    /// 1 − ρ²·exp(−|τ|/t_m) ⊗ IRF. Parameters: rho, t_m_ps, irf_fwhm_ps.
    G2BackgroundIrf,
    /// Weak-pump g² ⊗ IRF. Parameters: t1_ps, t2_ps, irf_fwhm_ps.
    G2ResonantWeakIrf,
    /// A·(w/2)²/((E−c)² + (w/2)²) + b. Parameters: amplitude, center_uev, fwhm_uev, background.
    LorentzianSinglet,
    /// Two Lorentzians sharing one width. Parameters: amplitude_1, center_1_uev,
    /// amplitude_2, center_2_uev, fwhm_uev, background.
    LorentzianDoublet,
    /// A·½·s/(1+s) with s = β·P·T₁·T₂. Parameters: t1_ps, t2_ps, beta, amplitude.
    Saturation,
    /// A·(exp(−(t−t₀)/T₁)·θ(t−t₀)) ⊗ IRF + b. Parameters: amplitude, t1_ps,
    /// t0_ps, background, irf_fwhm_ps.
    TcspcDecayIrf,
}

impl ModelId {
    pub const ALL: [ModelId; 6] = [
        ModelId::G2BackgroundIrf,
        ModelId::G2ResonantWeakIrf,
        ModelId::LorentzianSinglet,
        ModelId::LorentzianDoublet,
        ModelId::Saturation,
        ModelId::TcspcDecayIrf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelId::G2BackgroundIrf => "g2_background_irf",
            ModelId::G2ResonantWeakIrf => "g2_resonant_weak_irf",
            ModelId::LorentzianSinglet => "lorentzian_singlet",
            ModelId::LorentzianDoublet => "lorentzian_doublet",
            ModelId::Saturation => "saturation",
            ModelId::TcspcDecayIrf => "tcspc_decay_irf",
        }
    }

    pub fn model(self) -> &'static dyn Model {
        match self {
            ModelId::G2BackgroundIrf => &G2BackgroundIrf,
            ModelId::G2ResonantWeakIrf => &G2ResonantWeakIrf,
            ModelId::LorentzianSinglet => &LorentzianSinglet,
            ModelId::LorentzianDoublet => &LorentzianDoublet,
            ModelId::Saturation => &Saturation,
            ModelId::TcspcDecayIrf => &TcspcDecayIrf,
        }
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            ModelId::G2BackgroundIrf => &G2_BACKGROUND_PARAMS,
            ModelId::G2ResonantWeakIrf => &G2_WEAK_PARAMS,
            ModelId::LorentzianSinglet => &SINGLET_PARAMS,
            ModelId::LorentzianDoublet => &DOUBLET_PARAMS,
            ModelId::Saturation => &SATURATION_PARAMS,
            ModelId::TcspcDecayIrf => &TCSPC_PARAMS,
        }
    }

    pub fn param_index(self, name: &str) -> Option<usize> {
        self.param_names().iter().position(|&n| n == name)
    }

    /// Index of the IRF width parameter, for the convolved models.
    pub fn irf_index(self) -> Option<usize> {
        self.param_index("irf_fwhm_ps")
    }
}

impl std::fmt::Display for ModelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelId::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| {
            let known: Vec<&str> = ModelId::ALL.iter().map(|m| m.as_str()).collect();
            format!("unknown model '{s}' (known: {})", known.join(", "))
        })
    }
}

const G2_BACKGROUND_PARAMS: [&str; 3] = ["rho", "t_m_ps", "irf_fwhm_ps"];
const G2_WEAK_PARAMS: [&str; 3] = ["t1_ps", "t2_ps", "irf_fwhm_ps"];
const SINGLET_PARAMS: [&str; 4] = ["amplitude", "center_uev", "fwhm_uev", "background"];
const DOUBLET_PARAMS: [&str; 6] = ["amplitude_1", "center_1_uev", "amplitude_2", "center_2_uev", "fwhm_uev", "background"];
const SATURATION_PARAMS: [&str; 4] = ["t1_ps", "t2_ps", "beta", "amplitude"];
const TCSPC_PARAMS: [&str; 5] = ["amplitude", "t1_ps", "t0_ps", "background", "irf_fwhm_ps"];

const INF: f64 = f64::INFINITY;
/// Smallest admissible time constant [ps].
const MIN_TIME: f64 = 1e-3;

pub struct G2BackgroundIrf;

impl Model for G2BackgroundIrf {
    fn name(&self) -> &str {
        "g2_background_irf"
    }

    fn param_names(&self) -> &[&'static str] {
        &G2_BACKGROUND_PARAMS
    }

    fn value(&self, x: f64, p: &[f64]) -> f64 {
        let e = TwoSidedExpGauss::eval(x, 1.0 / p[1], fwhm_to_sigma(p[2]));
        1.0 - p[0] * p[0] * e.f
    }

    fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]) -> bool {
        let (rho, tm) = (p[0], p[1]);
        let e = TwoSidedExpGauss::eval(x, 1.0 / tm, fwhm_to_sigma(p[2]));
        out[0] = -2.0 * rho * e.f;
        out[1] = rho * rho * e.f_k / (tm * tm);
        out[2] = -rho * rho * e.f_s / FWHM_PER_SIGMA;
        true
    }

    fn default_bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0), (MIN_TIME, INF), (0.0, INF)]
    }
}

pub struct G2ResonantWeakIrf;

impl Model for G2ResonantWeakIrf {
    fn name(&self) -> &str {
        "g2_resonant_weak_irf"
    }

    fn param_names(&self) -> &[&'static str] {
        &G2_WEAK_PARAMS
    }

    fn value(&self, x: f64, p: &[f64]) -> f64 {
        let (t1, t2, sigma) = (p[0], p[1], fwhm_to_sigma(p[2]));
        if (t1 / t2 - 1.0).abs() < EQUAL_TIMES_RTOL {
            let k = 2.0 / (t1 + t2);
            let e = TwoSidedExpGauss::eval(x, k, sigma);
            return 1.0 - e.f + k * e.f_k;
        }
        let d = t2 - t1;
        let e1 = TwoSidedExpGauss::eval(x, 1.0 / t1, sigma);
        let e2 = TwoSidedExpGauss::eval(x, 1.0 / t2, sigma);
        1.0 - t2 / d * e2.f + t1 / d * e1.f
    }

    fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]) -> bool {
        let (t1, t2, sigma) = (p[0], p[1], fwhm_to_sigma(p[2]));
        if (t1 / t2 - 1.0).abs() < EQUAL_TIMES_RTOL {
            // Limit form 1 − E + k·E_k with k = 1/T, T the mean time; each
            // time enters through T with weight ½.
            let k = 2.0 / (t1 + t2);
            let e = TwoSidedExpGauss::eval(x, k, sigma);
            let d_t = -k * k * k * e.f_kk;
            out[0] = 0.5 * d_t;
            out[1] = 0.5 * d_t;
            out[2] = (-e.f_s + k * e.f_ks) / FWHM_PER_SIGMA;
            return true;
        }
        let d = t2 - t1;
        let d2 = d * d;
        let e1 = TwoSidedExpGauss::eval(x, 1.0 / t1, sigma);
        let e2 = TwoSidedExpGauss::eval(x, 1.0 / t2, sigma);
        let (a1, a2) = (t1 / d, -t2 / d);
        out[0] = -t2 / d2 * e2.f + t2 / d2 * e1.f - a1 * e1.f_k / (t1 * t1);
        out[1] = t1 / d2 * e2.f - a2 * e2.f_k / (t2 * t2) - t1 / d2 * e1.f;
        out[2] = (a2 * e2.f_s + a1 * e1.f_s) / FWHM_PER_SIGMA;
        true
    }

    fn default_bounds(&self) -> Vec<(f64, f64)> {
        vec![(MIN_TIME, INF), (MIN_TIME, INF), (0.0, INF)]
    }
}

#[inline]
fn lorentzian(x: f64, amp: f64, center: f64, fwhm: f64, out: Option<(&mut f64, &mut f64, &mut f64)>) -> f64 {
    let h = 0.5 * fwhm;
    let u = x - center;
    let den = u * u + h * h;
    let shape = h * h / den;
    if let Some((da, dc, dw)) = out {
        *da = shape;
        *dc = amp * h * h * 2.0 * u / (den * den);
        *dw = amp * h * u * u / (den * den);
    }
    amp * shape
}

pub struct LorentzianSinglet;

impl Model for LorentzianSinglet {
    fn name(&self) -> &str {
        "lorentzian_singlet"
    }

    fn param_names(&self) -> &[&'static str] {
        &SINGLET_PARAMS
    }

    fn value(&self, x: f64, p: &[f64]) -> f64 {
        lorentzian(x, p[0], p[1], p[2], None) + p[3]
    }

    fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]) -> bool {
        let (a, rest) = out.split_at_mut(1);
        let (c, rest) = rest.split_at_mut(1);
        lorentzian(x, p[0], p[1], p[2], Some((&mut a[0], &mut c[0], &mut rest[0])));
        rest[1] = 1.0;
        true
    }

    fn default_bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, INF), (-INF, INF), (1e-9, INF), (-INF, INF)]
    }
}

pub struct LorentzianDoublet;

impl Model for LorentzianDoublet {
    fn name(&self) -> &str {
        "lorentzian_doublet"
    }

    fn param_names(&self) -> &[&'static str] {
        &DOUBLET_PARAMS
    }

    fn value(&self, x: f64, p: &[f64]) -> f64 {
        lorentzian(x, p[0], p[1], p[4], None) + lorentzian(x, p[2], p[3], p[4], None) + p[5]
    }

    fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]) -> bool {
        let (mut w1, mut w2) = (0.0, 0.0);
        let (mut a1, mut c1, mut a2, mut c2) = (0.0, 0.0, 0.0, 0.0);
        lorentzian(x, p[0], p[1], p[4], Some((&mut a1, &mut c1, &mut w1)));
        lorentzian(x, p[2], p[3], p[4], Some((&mut a2, &mut c2, &mut w2)));
        out[0] = a1;
        out[1] = c1;
        out[2] = a2;
        out[3] = c2;
        out[4] = w1 + w2;
        out[5] = 1.0;
        true
    }

    fn default_bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, INF), (-INF, INF), (0.0, INF), (-INF, INF), (1e-9, INF), (-INF, INF)]
    }
}

pub struct Saturation;

impl Model for Saturation {
    fn name(&self) -> &str {
        "saturation"
    }

    fn param_names(&self) -> &[&'static str] {
        &SATURATION_PARAMS
    }

    fn value(&self, x: f64, p: &[f64]) -> f64 {
        let s = p[2] * x * p[0] * p[1];
        p[3] * 0.5 * s / (1.0 + s)
    }

    fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]) -> bool {
        let (t1, t2, beta, amp) = (p[0], p[1], p[2], p[3]);
        let s = beta * x * t1 * t2;
        let ds = amp * 0.5 / ((1.0 + s) * (1.0 + s));
        out[0] = ds * beta * x * t2;
        out[1] = ds * beta * x * t1;
        out[2] = ds * x * t1 * t2;
        out[3] = 0.5 * s / (1.0 + s);
        true
    }

    fn default_bounds(&self) -> Vec<(f64, f64)> {
        vec![(MIN_TIME, INF), (MIN_TIME, INF), (0.0, INF), (0.0, INF)]
    }
}

pub struct TcspcDecayIrf;

impl Model for TcspcDecayIrf {
    fn name(&self) -> &str {
        "tcspc_decay_irf"
    }

    fn param_names(&self) -> &[&'static str] {
        &TCSPC_PARAMS
    }

    fn value(&self, x: f64, p: &[f64]) -> f64 {
        p[0] * HalfExpGauss::eval(x - p[2], 1.0 / p[1], fwhm_to_sigma(p[4])).f + p[3]
    }

    fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]) -> bool {
        let (amp, t1) = (p[0], p[1]);
        let f = HalfExpGauss::eval(x - p[2], 1.0 / t1, fwhm_to_sigma(p[4]));
        out[0] = f.f;
        out[1] = -amp * f.f_k / (t1 * t1);
        out[2] = -amp * f.f_t;
        out[3] = 1.0;
        out[4] = amp * f.f_s / FWHM_PER_SIGMA;
        true
    }

    fn default_bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, INF), (MIN_TIME, INF), (-INF, INF), (-INF, INF), (0.0, INF)]
    }
}

/// Which quantity a power-series observation measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum PowerObservable {
    Intensity,
    /// Power-broadened FWHM [µeV].
    Linewidth,
}

/// Joint intensity and linewidth model over a power series. The abscissa is
/// the observation index. Parameters: t1_ps, t2_ps, beta, amplitude.
pub(crate) struct PowerSeriesModel {
    pub powers: Vec<f64>,
    pub kinds: Vec<PowerObservable>,
}

impl Model for PowerSeriesModel {
    fn name(&self) -> &str {
        "power_series"
    }

    fn param_names(&self) -> &[&'static str] {
        &SATURATION_PARAMS
    }

    fn value(&self, x: f64, p: &[f64]) -> f64 {
        let i = x as usize;
        let power = self.powers[i];
        match self.kinds[i] {
            PowerObservable::Intensity => Saturation.value(power, p),
            PowerObservable::Linewidth => {
                let s = p[2] * power * p[0] * p[1];
                2.0 * HBAR_UEV_PS / p[1] * (1.0 + s).sqrt()
            }
        }
    }

    fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]) -> bool {
        let i = x as usize;
        let power = self.powers[i];
        match self.kinds[i] {
            PowerObservable::Intensity => Saturation.gradient(power, p, out),
            PowerObservable::Linewidth => {
                let (t1, t2, beta) = (p[0], p[1], p[2]);
                let s = beta * power * t1 * t2;
                let root = (1.0 + s).sqrt();
                let g0 = 2.0 * HBAR_UEV_PS / t2;
                let ds = g0 * 0.5 / root;
                out[0] = ds * beta * power * t2;
                out[1] = -g0 / t2 * root + ds * beta * power * t1;
                out[2] = ds * power * t1 * t2;
                out[3] = 0.0;
                true
            }
        }
    }

    fn default_bounds(&self) -> Vec<(f64, f64)> {
        Saturation.default_bounds()
    }
}
