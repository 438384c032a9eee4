//! Weighted nonlinear least squares and the registered physical models.

mod analysis;
mod engine;
mod guess;
mod models;

use thiserror::Error;

pub use analysis::{
    extract_g2_zero, fit_doublet_scan, fit_power_series, DoubletFit, G2ZeroOptions, G2ZeroReport, IrfSensitivity,
    PowerSeries, PowerSeriesFit,
};
pub use engine::{solve, Degeneracy, FitOptions, FitResult, Problem, Termination, DEGENERACY_RATIO};
pub use guess::initial_guess;
pub use models::{
    G2BackgroundIrf, G2ResonantWeakIrf, LorentzianDoublet, LorentzianSinglet, Model, ModelId, Saturation, TcspcDecayIrf,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("data lengths differ: x {x}, y {y}, sigma {sigma}")]
    LengthMismatch { x: usize, y: usize, sigma: usize },
    #[error("expected {expected} parameters, got {got}")]
    ParameterCount { expected: usize, got: usize },
    #[error("{points} points cannot constrain {free} free parameters")]
    TooFewPoints { points: usize, free: usize },
    #[error("sigma at point {0} must be finite and positive")]
    NonPositiveSigma(usize),
    #[error("data point {0} is not finite")]
    NonFiniteData(usize),
    #[error("initial {name} = {value} is outside its bounds")]
    InitialOutOfBounds { name: String, value: f64 },
    #[error("model is not finite at the initial guess")]
    NonFiniteModel,
    #[error("unknown parameter '{0}'")]
    UnknownParameter(String),
    #[error("histogram must be normalized before fitting")]
    NotNormalized,
    #[error("model {0} does not describe a g2 histogram")]
    NotAG2Model(ModelId),
    #[error("need at least {needed} power points, got {got}")]
    InsufficientPowerPoints { needed: usize, got: usize },
}

/// A fit of one registered model.
#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem {
    pub model: ModelId,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Vec<f64>,
    pub initial: Vec<f64>,
    pub bounds: Vec<(f64, f64)>,
    pub fixed: Vec<bool>,
}

impl FitProblem {
    /// Problem with the model's default bounds and every parameter free.
    pub fn new(model: ModelId, x: Vec<f64>, y: Vec<f64>, sigma: Vec<f64>, initial: Vec<f64>) -> Self {
        let np = model.param_names().len();
        FitProblem {
            model,
            x,
            y,
            sigma,
            initial,
            bounds: model.model().default_bounds(),
            fixed: vec![false; np],
        }
    }

    pub fn fix(mut self, name: &str) -> Result<Self, FitError> {
        let i = self.model.param_index(name).ok_or_else(|| FitError::UnknownParameter(name.to_string()))?;
        self.fixed[i] = true;
        Ok(self)
    }

    pub fn set_initial(mut self, name: &str, value: f64) -> Result<Self, FitError> {
        let i = self.model.param_index(name).ok_or_else(|| FitError::UnknownParameter(name.to_string()))?;
        self.initial[i] = value;
        Ok(self)
    }

    pub fn as_problem(&self) -> Problem<'_> {
        Problem {
            model: self.model.model(),
            x: &self.x,
            y: &self.y,
            sigma: &self.sigma,
            initial: &self.initial,
            bounds: &self.bounds,
            fixed: &self.fixed,
        }
    }
}

pub fn fit(p: &FitProblem) -> Result<FitResult, FitError> {
    solve(&p.as_problem(), &FitOptions::default())
}

pub fn fit_with(p: &FitProblem, opts: &FitOptions) -> Result<FitResult, FitError> {
    solve(&p.as_problem(), opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn truth(id: ModelId) -> (Vec<f64>, Vec<f64>) {
        match id {
            ModelId::G2BackgroundIrf => ((-150..=150).map(|i| i as f64 * 20.0).collect(), vec![0.8f64.sqrt(), 500.0, 300.0]),
            ModelId::G2ResonantWeakIrf => ((-150..=150).map(|i| i as f64 * 20.0).collect(), vec![670.0, 460.0, 400.0]),
            ModelId::LorentzianSinglet => ((-200..=200).map(|i| i as f64 * 0.1).collect(), vec![1.0, 0.4, 4.0, 0.05]),
            ModelId::LorentzianDoublet => ((-250..=250).map(|i| i as f64 * 0.1).collect(), vec![1.0, -5.65, 0.8, 5.65, 4.0, 0.02]),
            ModelId::Saturation => ((1..=40).map(|i| i as f64 * 25.0).collect(), vec![670.0, 460.0, 3.2e-8 / 10.0, 1.0]),
            ModelId::TcspcDecayIrf => ((0..400).map(|i| i as f64 * 16.0).collect(), vec![1.0, 650.0, 1000.0, 0.01, 300.0]),
        }
    }

    /// The IRF width of convolved models and T₂ of the saturation model are
    /// held fixed; every other parameter is free.
    fn problem(id: ModelId, y: Vec<f64>, x: Vec<f64>, init: Vec<f64>) -> FitProblem {
        let n = x.len();
        let mut p = FitProblem::new(id, x, y, vec![0.01; n], init);
        if let Some(i) = id.irf_index() {
            p.fixed[i] = true;
        }
        if id == ModelId::Saturation {
            p.fixed[1] = true;
            p.fixed[2] = true;
        }
        p
    }

    #[test]
    fn noiseless_recovery_from_perturbed_start() {
        for id in ModelId::ALL {
            let (x, p) = truth(id);
            let m = id.model();
            let y: Vec<f64> = x.iter().map(|&v| m.value(v, &p)).collect();
            let init: Vec<f64> = p
                .iter()
                .enumerate()
                .map(|(j, &v)| if j % 2 == 0 { v * 1.2 } else { v * 0.8 })
                .collect();
            let mut fp = problem(id, y, x, init);
            // Perturbations stay off the fixed parameters and inside the bounds.
            for j in 0..p.len() {
                if fp.fixed[j] {
                    fp.initial[j] = p[j];
                }
                fp.initial[j] = fp.initial[j].clamp(fp.bounds[j].0, fp.bounds[j].1);
            }
            let r = fit(&fp).unwrap();
            assert!(r.converged, "{id}");
            for j in 0..p.len() {
                let rel = (r.params[j] - p[j]).abs() / p[j].abs().max(1e-300);
                assert!(rel < 1e-6, "{id} {}: {} vs {}", r.param_names[j], r.params[j], p[j]);
            }
        }
    }

    #[test]
    fn invariant_under_reordering_and_sigma_scaling() {
        let id = ModelId::G2BackgroundIrf;
        let (x, p) = truth(id);
        let m = id.model();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noise = Normal::new(0.0, 0.02).unwrap();
        let y: Vec<f64> = x.iter().map(|&v| m.value(v, &p) + noise.sample(&mut rng)).collect();
        let init = vec![0.8, 400.0, 300.0];
        let base = fit(&problem(id, y.clone(), x.clone(), init.clone())).unwrap();

        let mut order: Vec<usize> = (0..x.len()).collect();
        order.reverse();
        order.rotate_left(37);
        let xr: Vec<f64> = order.iter().map(|&i| x[i]).collect();
        let yr: Vec<f64> = order.iter().map(|&i| y[i]).collect();
        let shuffled = fit(&problem(id, yr, xr, init.clone())).unwrap();

        let mut scaled = problem(id, y, x, init);
        scaled.sigma.iter_mut().for_each(|s| *s *= 3.0);
        let scaled = fit(&scaled).unwrap();
        for j in 0..2 {
            assert!((shuffled.params[j] - base.params[j]).abs() < 1e-6 * base.errors[j]);
            assert!((scaled.params[j] - base.params[j]).abs() < 1e-6 * base.errors[j]);
            assert!((scaled.errors[j] / base.errors[j] - 3.0).abs() < 1e-6);
        }
        assert!((scaled.chi2 * 9.0 / base.chi2 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn reported_errors_cover_truth() {
        let id = ModelId::LorentzianSinglet;
        let (x, p) = truth(id);
        let m = id.model();
        let noise = Normal::new(0.0, 0.03).unwrap();
        let mut covered = vec![0usize; p.len()];
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> = x.iter().map(|&v| m.value(v, &p) + noise.sample(&mut rng)).collect();
            let mut fp = FitProblem::new(id, x.clone(), y, vec![0.03; x.len()], vec![0.9, 0.0, 3.0, 0.0]);
            fp.fixed = vec![false; 4];
            let r = fit(&fp).unwrap();
            for j in 0..p.len() {
                if (r.params[j] - p[j]).abs() <= r.errors[j] {
                    covered[j] += 1;
                }
            }
        }
        for (j, &c) in covered.iter().enumerate() {
            assert!(c >= 60, "parameter {j} covered {c}/100");
        }
    }

    #[test]
    fn noiseless_background_fit_from_exact_start() {
        let id = ModelId::G2BackgroundIrf;
        let x: Vec<f64> = (-150..=150).map(|i| i as f64 * 20.0).collect();
        let p = vec![0.8f64.sqrt(), 500.0, 0.0];
        let y: Vec<f64> = x.iter().map(|&v| id.model().value(v, &p)).collect();
        let r = fit(&problem(id, y, x, p.clone())).unwrap();
        assert_eq!(r.iterations, 0);
        for j in 0..3 {
            assert!((r.params[j] - p[j]).abs() <= 1e-8 * p[j].abs());
        }
    }
}
