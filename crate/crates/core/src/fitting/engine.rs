//! Weighted least squares by Levenberg–Marquardt with box constraints.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::models::Model;
use super::FitError;

/// Ratio of smallest to largest eigenvalue of the scaled curvature below
/// which a parameter combination counts as unidentifiable.
pub const DEGENERACY_RATIO: f64 = 1e-10;
/// Components of the degenerate direction above this magnitude name the
/// parameters involved.
const DEGENERATE_COMPONENT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Relative χ² change that ends the descent.
    pub chi2_tolerance: f64,
    /// Relative parameter step that ends the descent.
    pub step_tolerance: f64,
    /// Use central differences even when an analytic gradient exists.
    pub finite_differences: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 500,
            chi2_tolerance: 1e-10,
            step_tolerance: 1e-10,
            finite_differences: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The initial point already has zero residual or zero gradient.
    InitialOptimum,
    Chi2Tolerance,
    StepTolerance,
    /// No damping produced a decrease; the point is a numerical minimum.
    DampingExhausted,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Degeneracy {
    /// Unit direction in parameter space along which χ² is flat.
    pub direction: Vec<f64>,
    /// Parameters that move along that direction.
    pub parameters: Vec<String>,
    /// Smallest over largest eigenvalue of the scaled curvature.
    pub eigenvalue_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub param_names: Vec<String>,
    pub params: Vec<f64>,
    /// 1σ errors; zero for fixed and infinite for unidentifiable parameters.
    pub errors: Vec<f64>,
    /// Covariance over all parameters (zero rows for fixed ones); the
    /// pseudo-inverse of the curvature when it is singular.
    pub covariance: Vec<Vec<f64>>,
    pub fixed: Vec<bool>,
    pub chi2: f64,
    pub initial_chi2: f64,
    pub dof: usize,
    /// y − f(x) per point.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub degeneracy: Option<Degeneracy>,
}

impl FitResult {
    pub fn reduced_chi2(&self) -> f64 {
        self.chi2 / self.dof as f64
    }

    pub fn param(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.param_names.iter().position(|n| n == name)?;
        Some((self.params[i], self.errors[i]))
    }

    pub fn is_degenerate(&self) -> bool {
        self.degeneracy.is_some()
    }
}

/// Data, starting point and constraints for one fit against `model`.
pub struct Problem<'a> {
    pub model: &'a dyn Model,
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub sigma: &'a [f64],
    pub initial: &'a [f64],
    pub bounds: &'a [(f64, f64)],
    pub fixed: &'a [bool],
}

impl Problem<'_> {
    fn validate(&self) -> Result<Vec<usize>, FitError> {
        let n = self.x.len();
        if self.y.len() != n || self.sigma.len() != n {
            return Err(FitError::LengthMismatch {
                x: n,
                y: self.y.len(),
                sigma: self.sigma.len(),
            });
        }
        let np = self.model.param_names().len();
        if self.initial.len() != np || self.bounds.len() != np || self.fixed.len() != np {
            return Err(FitError::ParameterCount { expected: np, got: self.initial.len() });
        }
        let free: Vec<usize> = (0..np).filter(|&j| !self.fixed[j]).collect();
        if n < free.len() + 1 {
            return Err(FitError::TooFewPoints { points: n, free: free.len() });
        }
        if let Some(i) = self.sigma.iter().position(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(FitError::NonPositiveSigma(i));
        }
        if let Some(i) = self.x.iter().chain(self.y).position(|v| !v.is_finite()) {
            return Err(FitError::NonFiniteData(i % n));
        }
        for (j, (&p, &(lo, hi))) in self.initial.iter().zip(self.bounds).enumerate() {
            if !p.is_finite() || p < lo || p > hi {
                return Err(FitError::InitialOutOfBounds {
                    name: self.model.param_names()[j].to_string(),
                    value: p,
                });
            }
        }
        Ok(free)
    }
}

struct Linearization {
    /// Weighted residuals (y − f)/σ.
    r: DVector<f64>,
    /// Weighted Jacobian ∂f/∂p / σ over the free parameters.
    j: DMatrix<f64>,
}

fn chi2_at(p: &Problem, params: &[f64]) -> f64 {
    p.x.iter()
        .zip(p.y)
        .zip(p.sigma)
        .map(|((&x, &y), &s)| ((y - p.model.value(x, params)) / s).powi(2))
        .sum()
}

fn numeric_derivative(p: &Problem, x: f64, params: &[f64], j: usize) -> f64 {
    let (lo, hi) = p.bounds[j];
    let v = params[j];
    let h = 1e-6 * if v != 0.0 { v.abs() } else { 1.0 };
    let eval = |d: f64| {
        let mut q = params.to_vec();
        q[j] = v + d;
        p.model.value(x, &q)
    };
    if v - h >= lo && v + h <= hi {
        (eval(h) - eval(-h)) / (2.0 * h)
    } else if v + 2.0 * h <= hi {
        (-3.0 * eval(0.0) + 4.0 * eval(h) - eval(2.0 * h)) / (2.0 * h)
    } else {
        (3.0 * eval(0.0) - 4.0 * eval(-h) + eval(-2.0 * h)) / (2.0 * h)
    }
}

fn linearize(p: &Problem, params: &[f64], free: &[usize], opts: &FitOptions) -> Linearization {
    let n = p.x.len();
    let mut r = DVector::zeros(n);
    let mut jac = DMatrix::zeros(n, free.len());
    let mut grad = vec![0.0; params.len()];
    for i in 0..n {
        let x = p.x[i];
        r[i] = (p.y[i] - p.model.value(x, params)) / p.sigma[i];
        let analytic = !opts.finite_differences && p.model.gradient(x, params, &mut grad);
        for (c, &j) in free.iter().enumerate() {
            let d = if analytic { grad[j] } else { numeric_derivative(p, x, params, j) };
            jac[(i, c)] = d / p.sigma[i];
        }
    }
    Linearization { r, j: jac }
}

fn clamp_to_bounds(p: &Problem, params: &mut [f64]) {
    for (v, &(lo, hi)) in params.iter_mut().zip(p.bounds) {
        *v = v.clamp(lo, hi);
    }
}

/// Runs the damped Gauss–Newton descent.
pub fn solve(p: &Problem, opts: &FitOptions) -> Result<FitResult, FitError> {
    let free = p.validate()?;
    let mut params = p.initial.to_vec();
    let mut chi2 = chi2_at(p, &params);
    if !chi2.is_finite() {
        return Err(FitError::NonFiniteModel);
    }
    let initial_chi2 = chi2;
    let scale: f64 = p.y.iter().zip(p.sigma).map(|(&y, &s)| (y / s).powi(2)).sum::<f64>().max(1.0);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut lin = linearize(p, &params, &free, opts);
    let mut termination = None;

    let grad_inf = |lin: &Linearization| (lin.j.transpose() * &lin.r).amax();
    if free.is_empty() || chi2 <= f64::EPSILON * f64::EPSILON * scale || grad_inf(&lin) == 0.0 {
        termination = Some(Termination::InitialOptimum);
    }

    while termination.is_none() {
        if iterations >= opts.max_iterations {
            termination = Some(Termination::MaxIterations);
            break;
        }
        iterations += 1;
        let jt = lin.j.transpose();
        let a = &jt * &lin.j;
        let g = &jt * &lin.r;
        let dmax = a.diagonal().amax().max(f64::MIN_POSITIVE);
        let mut damped = a.clone();
        for c in 0..free.len() {
            damped[(c, c)] += lambda * a[(c, c)].max(1e-12 * dmax);
        }
        let step = match damped.cholesky() {
            Some(ch) => ch.solve(&g),
            None => {
                lambda *= 10.0;
                if lambda > 1e20 {
                    termination = Some(Termination::DampingExhausted);
                }
                continue;
            }
        };
        let mut trial = params.clone();
        for (c, &j) in free.iter().enumerate() {
            trial[j] += step[c];
        }
        clamp_to_bounds(p, &mut trial);
        let trial_chi2 = chi2_at(p, &trial);
        if trial_chi2.is_finite() && trial_chi2 < chi2 {
            let rel_step = free
                .iter()
                .map(|&j| (trial[j] - params[j]).abs() / (params[j].abs() + f64::EPSILON))
                .fold(0.0f64, f64::max);
            let rel_chi2 = (chi2 - trial_chi2) / trial_chi2.max(f64::MIN_POSITIVE);
            params = trial;
            chi2 = trial_chi2;
            lambda = (lambda / 10.0).max(1e-12);
            lin = linearize(p, &params, &free, opts);
            if rel_chi2 < opts.chi2_tolerance {
                termination = Some(Termination::Chi2Tolerance);
            } else if rel_step < opts.step_tolerance {
                termination = Some(Termination::StepTolerance);
            } else if chi2 <= f64::EPSILON * f64::EPSILON * scale {
                termination = Some(Termination::Chi2Tolerance);
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e16 {
                termination = Some(Termination::DampingExhausted);
            }
        }
    }
    let termination = termination.expect("loop exits with a reason");

    let (covariance, errors, degeneracy) = curvature_analysis(p, &free, &lin.j, &params);
    let residuals = p
        .x
        .iter()
        .zip(p.y)
        .map(|(&x, &y)| y - p.model.value(x, &params))
        .collect();
    Ok(FitResult {
        model: p.model.name().to_string(),
        param_names: p.model.param_names().iter().map(|s| s.to_string()).collect(),
        params,
        errors,
        covariance,
        fixed: p.fixed.to_vec(),
        chi2,
        initial_chi2,
        dof: p.x.len() - free.len(),
        residuals,
        iterations,
        converged: termination != Termination::MaxIterations,
        termination,
        degeneracy,
    })
}

type CurvatureReport = (Vec<Vec<f64>>, Vec<f64>, Option<Degeneracy>);

/// Covariance (JᵀJ)⁻¹ and the flattest direction of the scaled curvature.
fn curvature_analysis(p: &Problem, free: &[usize], jac: &DMatrix<f64>, params: &[f64]) -> CurvatureReport {
    let np = params.len();
    let mut cov = vec![vec![0.0; np]; np];
    let mut errors = vec![0.0; np];
    if free.is_empty() {
        return (cov, errors, None);
    }
    let a = jac.transpose() * jac;
    let m = free.len();
    let d: Vec<f64> = (0..m).map(|c| a[(c, c)].sqrt()).collect();
    let mut scaled = a.clone();
    for r in 0..m {
        for c in 0..m {
            let s = d[r] * d[c];
            scaled[(r, c)] = if s > 0.0 { a[(r, c)] / s } else { 0.0 };
        }
    }
    let eig = SymmetricEigen::new(scaled);
    let max_ev = eig.eigenvalues.amax();
    let (imin, min_ev) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one free parameter");
    let ratio = if max_ev > 0.0 { min_ev.max(0.0) / max_ev } else { 0.0 };
    let zero_column = d.iter().any(|&v| v == 0.0);

    // Pseudo-inverse in the scaled basis, dropping flat directions.
    let cutoff = DEGENERACY_RATIO * max_ev;
    let mut inv_scaled = DMatrix::zeros(m, m);
    for k in 0..m {
        let ev = eig.eigenvalues[k];
        if ev > cutoff {
            let v = eig.eigenvectors.column(k);
            inv_scaled += (v * v.transpose()) / ev;
        }
    }
    for r in 0..m {
        for c in 0..m {
            let s = d[r] * d[c];
            cov[free[r]][free[c]] = if s > 0.0 { inv_scaled[(r, c)] / s } else { 0.0 };
        }
    }
    for (c, &j) in free.iter().enumerate() {
        errors[j] = cov[j][j].max(0.0).sqrt();
        if d[c] == 0.0 {
            errors[j] = f64::INFINITY;
        }
    }

    let degeneracy = (ratio < DEGENERACY_RATIO || zero_column).then(|| {
        let v = eig.eigenvectors.column(imin);
        // Back to parameter units, then normalised.
        let mut dir = vec![0.0; np];
        for (c, &j) in free.iter().enumerate() {
            dir[j] = if d[c] > 0.0 { v[c] / d[c] } else { 1.0 };
        }
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        dir.iter_mut().for_each(|x| *x /= norm);
        let mut names = Vec::new();
        for (c, &j) in free.iter().enumerate() {
            if v[c].abs() > DEGENERATE_COMPONENT || d[c] == 0.0 {
                names.push(p.model.param_names()[j].to_string());
                errors[j] = f64::INFINITY;
            }
        }
        Degeneracy {
            direction: dir,
            parameters: names,
            eigenvalue_ratio: ratio,
        }
    });
    (cov, errors, degeneracy)
}
