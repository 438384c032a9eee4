//! Gaussian instrument-response convolution.
//!
//! Models that are sums of exponentials in |τ| (or one-sided decays) are
//! convolved in closed form through the complementary error function. Any
//! other model falls back to adaptive quadrature.

use libm::erfc;
use thiserror::Error;

use super::quadrature::{integrate_pieces, QuadratureError};
use super::special::{erfcx, gaussian_pdf};
use super::{EmitterParams, IrfParams};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
/// Half-width of the quadrature domain in units of σ.
const QUAD_REACH_SIGMAS: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("IRF convolution failed at tau = {tau} ps: {source}")]
pub struct ConvolutionError {
    pub tau: f64,
    #[source]
    pub source: QuadratureError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpShape {
    /// exp(−|t|/T)
    TwoSided,
    /// (|t|/T)·exp(−|t|/T)
    TwoSidedLinear,
    /// exp(−t/T) for t ≥ 0, zero before.
    Causal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    pub amplitude: f64,
    pub time: f64,
    pub shape: ExpShape,
}

impl ExpTerm {
    pub fn new(amplitude: f64, time: f64, shape: ExpShape) -> Self {
        ExpTerm { amplitude, time, shape }
    }

    fn value(&self, t: f64) -> f64 {
        let x = t.abs() / self.time;
        self.amplitude
            * match self.shape {
                ExpShape::TwoSided => (-x).exp(),
                ExpShape::TwoSidedLinear => x * (-x).exp(),
                ExpShape::Causal if t >= 0.0 => (-x).exp(),
                ExpShape::Causal => 0.0,
            }
    }

    fn convolved(&self, t: f64, sigma: f64) -> f64 {
        if sigma == 0.0 {
            return self.value(t);
        }
        let k = 1.0 / self.time;
        self.amplitude
            * match self.shape {
                ExpShape::Causal => HalfExpGauss::eval(t, k, sigma).f,
                ExpShape::TwoSided => TwoSidedExpGauss::eval(t, k, sigma).f,
                ExpShape::TwoSidedLinear => -k * TwoSidedExpGauss::eval(t, k, sigma).f_k,
            }
    }
}

/// c₀ + Σ aᵢ·shapeᵢ(t; Tᵢ).
#[derive(Debug, Clone, PartialEq)]
pub struct ExpSum {
    pub constant: f64,
    pub terms: Vec<ExpTerm>,
}

impl ExpSum {
    pub fn value(&self, t: f64) -> f64 {
        self.constant + self.terms.iter().map(|term| term.value(t)).sum::<f64>()
    }

    /// Value after convolution with a unit-area Gaussian of width `sigma`.
    pub fn convolved(&self, t: f64, sigma: f64) -> f64 {
        self.constant + self.terms.iter().map(|term| term.convolved(t, sigma)).sum::<f64>()
    }
}

/// A function of time or delay that can be convolved with the IRF.
pub trait TimeResponse {
    fn value(&self, t: f64) -> f64;

    /// Exponential decomposition enabling the closed-form convolution.
    fn exp_sum(&self) -> Option<ExpSum> {
        None
    }
}

impl TimeResponse for ExpSum {
    fn value(&self, t: f64) -> f64 {
        ExpSum::value(self, t)
    }

    fn exp_sum(&self) -> Option<ExpSum> {
        Some(self.clone())
    }
}

/// Wraps an arbitrary closure; always convolved by quadrature.
pub struct FnResponse<F>(pub F);

impl<F: Fn(f64) -> f64> TimeResponse for FnResponse<F> {
    fn value(&self, t: f64) -> f64 {
        (self.0)(t)
    }
}

/// Returns `model` convolved with the Gaussian IRF.
pub fn convolve_with_irf<M: TimeResponse>(model: M, irf: IrfParams) -> Convolved<M> {
    let closed = model.exp_sum();
    Convolved { model, irf, closed }
}

/// A model convolved with a Gaussian instrument response.
pub struct Convolved<M> {
    model: M,
    irf: IrfParams,
    closed: Option<ExpSum>,
}

impl<M: TimeResponse> Convolved<M> {
    pub fn irf(&self) -> IrfParams {
        self.irf
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn uses_closed_form(&self) -> bool {
        self.closed.is_some()
    }

    pub fn eval(&self, t: f64) -> Result<f64, ConvolutionError> {
        if self.irf.is_ideal() {
            return Ok(self.model.value(t));
        }
        match &self.closed {
            Some(sum) => Ok(sum.convolved(t, self.irf.sigma())),
            None => self.eval_numeric(t),
        }
    }

    /// Quadrature path, regardless of whether a closed form exists.
    pub fn eval_numeric(&self, t: f64) -> Result<f64, ConvolutionError> {
        if self.irf.is_ideal() {
            return Ok(self.model.value(t));
        }
        let sigma = self.irf.sigma();
        let reach = QUAD_REACH_SIGMAS * sigma;
        // Break at u = t where the model argument t − u crosses its kink.
        let mut points = vec![-reach, reach];
        if t > -reach && t < reach {
            points.insert(1, t);
        }
        integrate_pieces(
            |u| gaussian_pdf(u, sigma) * self.model.value(t - u),
            &points,
            1e-13,
            1e-12,
        )
        .map_err(|source| ConvolutionError { tau: t, source })
    }
}

/// TCSPC decay exp(−t/T₁)·Θ(t) convolved with the IRF.
pub fn tcspc_decay(t: f64, e: &EmitterParams, irf: &IrfParams) -> f64 {
    ExpTerm::new(1.0, e.t1, ExpShape::Causal).convolved(t, irf.sigma())
}

/// F(t) = ∫₀^∞ e^{−k u} G_σ(t − u) du and its partial derivatives.
#[derive(Debug, Clone, Copy)]
pub(crate) struct HalfExpGauss {
    pub f: f64,
    pub f_k: f64,
    pub f_s: f64,
    pub f_t: f64,
    pub f_kk: f64,
    pub f_ks: f64,
}

impl HalfExpGauss {
    pub fn eval(t: f64, k: f64, sigma: f64) -> Self {
        if sigma == 0.0 {
            let f = if t >= 0.0 { (-k * t).exp() } else { 0.0 };
            return HalfExpGauss {
                f,
                f_k: -t * f,
                f_s: 0.0,
                f_t: -k * f,
                f_kk: t * t * f,
                f_ks: 0.0,
            };
        }
        let z = (k * sigma - t / sigma) / SQRT_2;
        let f = if z >= 0.0 {
            0.5 * (-0.5 * (t / sigma).powi(2)).exp() * erfcx(z)
        } else {
            0.5 * (0.5 * k * k * sigma * sigma - k * t).exp() * erfc(z)
        };
        let g = gaussian_pdf(t, sigma);
        let s2 = sigma * sigma;
        let a = k * s2 - t;
        let f_k = a * f - s2 * g;
        let f_s = k * k * sigma * f - (k + t / s2) * sigma * g;
        let g_s = g * (t * t / (s2 * sigma) - 1.0 / sigma);
        HalfExpGauss {
            f,
            f_k,
            f_s,
            f_t: g - k * f,
            f_kk: s2 * f + a * f_k,
            f_ks: 2.0 * k * sigma * f + a * f_s - 2.0 * sigma * g - s2 * g_s,
        }
    }
}

/// E(t) = (e^{−k|·|} ⊗ G_σ)(t) = F(t) + F(−t) and its partial derivatives.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TwoSidedExpGauss {
    pub f: f64,
    pub f_k: f64,
    pub f_s: f64,
    pub f_kk: f64,
    pub f_ks: f64,
}

impl TwoSidedExpGauss {
    pub fn eval(t: f64, k: f64, sigma: f64) -> Self {
        if sigma == 0.0 {
            let a = t.abs();
            let f = (-k * a).exp();
            return TwoSidedExpGauss {
                f,
                f_k: -a * f,
                f_s: 0.0,
                f_kk: a * a * f,
                f_ks: 0.0,
            };
        }
        let p = HalfExpGauss::eval(t, k, sigma);
        let m = HalfExpGauss::eval(-t, k, sigma);
        TwoSidedExpGauss {
            f: p.f + m.f,
            f_k: p.f_k + m.f_k,
            f_s: p.f_s + m.f_s,
            f_kk: p.f_kk + m.f_kk,
            f_ks: p.f_ks + m.f_ks,
        }
    }
}
