//! Reset-renewal quantum-jump emission.
//!
//! Each emission returns the emitter to its ground state, so successive
//! waiting times are independent draws from one distribution. Its survival
//! function S(t) is the trace of the density matrix evolved under the
//! no-jump (conditional) optical Bloch equations from the ground state, and
//! its density is ρ̃_ee(t)/T₁. The survival function is tabulated once with a
//! fixed-step RK4 integrator and sampled by inversion.

use rand::Rng;

use super::rng::{stage_rng, Stage};
use super::{SimConfig, SimError};
use crate::physics::{DriveParams, EmitterParams};

/// Survival level at which the table stops and the exponential tail takes over.
const SURVIVAL_FLOOR: f64 = 1e-13;
const MAX_TABLE_STEPS: usize = 1 << 22;

/// State (ρ_ee, ρ_gg, Re ρ_eg, Im ρ_eg) of the unnormalised no-jump evolution.
type State = [f64; 4];

#[derive(Debug, Clone, Copy)]
struct NoJumpBloch {
    gamma1: f64,
    gamma2: f64,
    rabi: f64,
    detuning: f64,
}

impl NoJumpBloch {
    fn new(e: &EmitterParams, d: &DriveParams) -> Self {
        NoJumpBloch {
            gamma1: 1.0 / e.t1,
            gamma2: 1.0 / e.t2,
            rabi: d.rabi_frequency(),
            detuning: d.laser_detuning,
        }
    }

    fn rhs(&self, s: &State) -> State {
        let [ee, gg, x, y] = *s;
        [
            -self.gamma1 * ee - self.rabi * y,
            self.rabi * y,
            -self.gamma2 * x + self.detuning * y,
            -self.gamma2 * y - self.detuning * x - 0.5 * self.rabi * (gg - ee),
        ]
    }

    fn rk4(&self, s: &State, dt: f64) -> State {
        let add = |a: &State, b: &State, h: f64| -> State { std::array::from_fn(|i| a[i] + h * b[i]) };
        let k1 = self.rhs(s);
        let k2 = self.rhs(&add(s, &k1, 0.5 * dt));
        let k3 = self.rhs(&add(s, &k2, 0.5 * dt));
        let k4 = self.rhs(&add(s, &k3, dt));
        std::array::from_fn(|i| s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
    }
}

/// Tabulated waiting-time distribution between consecutive emissions.
#[derive(Debug, Clone)]
pub struct WaitingTimeDistribution {
    dt: f64,
    survival: Vec<f64>,
    density: Vec<f64>,
    tail_hazard: f64,
}

impl WaitingTimeDistribution {
    /// Integrates the no-jump equations from the ground state with step `dt`.
    /// Returns `None` when the drive is off (no emission ever happens).
    pub fn build(e: &EmitterParams, d: &DriveParams, dt: f64) -> Option<Self> {
        if d.rabi_squared() == 0.0 {
            return None;
        }
        let bloch = NoJumpBloch::new(e, d);
        let mut state: State = [0.0, 1.0, 0.0, 0.0];
        let mut survival = vec![1.0];
        let mut density = vec![0.0];
        let slow = e.t1.max(e.t2);
        let settle_steps = (50.0 * slow / dt).ceil() as usize;
        let window = (slow / dt).ceil().max(1.0) as usize;
        loop {
            state = bloch.rk4(&state, dt);
            let s = (state[0] + state[1]).min(*survival.last().unwrap());
            survival.push(s);
            density.push(state[0].max(0.0) * bloch.gamma1);
            let n = survival.len();
            if s < SURVIVAL_FLOOR || n >= MAX_TABLE_STEPS {
                break;
            }
            // Once the transient has died out the hazard is constant and the
            // remainder is an exact exponential tail.
            if n > settle_steps && n > window {
                let h_now = density[n - 1] / survival[n - 1];
                let h_then = density[n - 1 - window] / survival[n - 1 - window];
                if (h_now - h_then).abs() <= 1e-10 * h_now {
                    break;
                }
            }
        }
        let n = survival.len();
        let tail_hazard = density[n - 1] / survival[n - 1];
        Some(WaitingTimeDistribution {
            dt,
            survival,
            density,
            tail_hazard,
        })
    }

    pub fn step(&self) -> f64 {
        self.dt
    }

    pub fn table_len(&self) -> usize {
        self.survival.len()
    }

    /// Survival probability S(t).
    pub fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        let x = t / self.dt;
        let i = x.floor() as usize;
        if i + 1 >= self.survival.len() {
            let n = self.survival.len() - 1;
            return self.survival[n] * (-(t - n as f64 * self.dt) * self.tail_hazard).exp();
        }
        self.hermite(i, x - i as f64)
    }

    /// Waiting-time density w(t) = ρ̃_ee(t)/T₁ (linear between nodes).
    pub fn density(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let x = t / self.dt;
        let i = x.floor() as usize;
        if i + 1 >= self.density.len() {
            return self.tail_hazard * self.survival(t);
        }
        let th = x - i as f64;
        self.density[i] * (1.0 - th) + self.density[i + 1] * th
    }

    /// Mean waiting time, i.e. the inverse of the long-run emission rate.
    pub fn mean(&self) -> f64 {
        // Simpson-like trapezoid with Hermite end corrections.
        let s = &self.survival;
        let w = &self.density;
        let h = self.dt;
        let mut sum = 0.0;
        for i in 0..s.len() - 1 {
            sum += 0.5 * h * (s[i] + s[i + 1]) + h * h / 12.0 * (w[i + 1] - w[i]);
        }
        sum + s[s.len() - 1] / self.tail_hazard
    }

    /// Waiting time whose survival probability equals `u` ∈ (0, 1].
    pub fn invert(&self, u: f64) -> f64 {
        let s = &self.survival;
        let idx = s.partition_point(|&v| v >= u);
        if idx == 0 {
            return 0.0;
        }
        if idx == s.len() {
            let n = s.len() - 1;
            return n as f64 * self.dt + (s[n] / u).ln() / self.tail_hazard;
        }
        let i = idx - 1;
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..52 {
            let mid = 0.5 * (lo + hi);
            if self.hermite(i, mid) >= u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (i as f64 + 0.5 * (lo + hi)) * self.dt
    }

    /// Cubic Hermite interpolation of S on `[tᵢ, tᵢ₊₁]` using S' = −w.
    fn hermite(&self, i: usize, th: f64) -> f64 {
        let (s0, s1) = (self.survival[i], self.survival[i + 1]);
        let (m0, m1) = (-self.density[i] * self.dt, -self.density[i + 1] * self.dt);
        let th2 = th * th;
        let th3 = th2 * th;
        (2.0 * th3 - 3.0 * th2 + 1.0) * s0
            + (th3 - 2.0 * th2 + th) * m0
            + (-2.0 * th3 + 3.0 * th2) * s1
            + (th3 - th2) * m1
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = 1.0 - rng.random::<f64>();
        self.invert(u)
    }
}

/// Ordered emission times [ps] within `[0, duration)`.
///
/// The emitter starts in its ground state at t = 0. Zero drive yields an
/// empty list and a logged warning.
pub fn simulate_emission_times(cfg: &SimConfig) -> Result<Vec<f64>, SimError> {
    cfg.validate()?;
    let Some(wtd) = WaitingTimeDistribution::build(&cfg.emitter, &cfg.drive, cfg.dt_ps) else {
        log::warn!("drive is off (Ω = 0): no emission expected in {} ps", cfg.duration_ps);
        return Ok(Vec::new());
    };
    let duration = cfg.duration_ps as f64;
    let expected = duration / wtd.mean();
    if expected < 1.0 {
        log::warn!("only {expected:.3} emissions expected in {} ps", cfg.duration_ps);
    }
    let mut rng = stage_rng(cfg.rng_seed, Stage::Emission);
    let mut times = Vec::with_capacity((expected * 1.05) as usize + 16);
    let mut t = 0.0;
    loop {
        t += wtd.sample(&mut rng);
        if t >= duration {
            break;
        }
        times.push(t);
    }
    Ok(times)
}

/// Outcome of re-tabulating the waiting-time distribution at half the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepHalvingReport {
    /// Zero-delay-bin g² estimate at the configured step.
    pub g2_zero_bin: f64,
    /// Same with the step halved.
    pub g2_zero_bin_halved: f64,
    /// Poisson error of the zero bin for the expected number of coincidences.
    pub statistical_error: f64,
}

impl StepHalvingReport {
    pub fn change(&self) -> f64 {
        (self.g2_zero_bin - self.g2_zero_bin_halved).abs()
    }

    pub fn passes(&self) -> bool {
        self.change() < self.statistical_error
    }
}

/// Compares the zero-bin g² implied by the tables at `dt` and `dt/2`.
///
/// For a bin of width `bin_ps` centred on zero the ordered-pair density near
/// τ = 0 is dominated by the first waiting time, so
/// g²(0-bin) ≈ 2·P(T < bin/2) / (rate·bin).
pub fn step_halving_check(cfg: &SimConfig, bin_ps: f64) -> Result<Option<StepHalvingReport>, SimError> {
    cfg.validate()?;
    let Some(coarse) = WaitingTimeDistribution::build(&cfg.emitter, &cfg.drive, cfg.dt_ps) else {
        return Ok(None);
    };
    let fine = WaitingTimeDistribution::build(&cfg.emitter, &cfg.drive, 0.5 * cfg.dt_ps).expect("drive is on");
    let g2 = |w: &WaitingTimeDistribution| {
        let rate = 1.0 / w.mean();
        (1.0 - w.survival(0.5 * bin_ps)) / (0.5 * rate * bin_ps)
    };
    let (a, b) = (g2(&coarse), g2(&fine));
    let rate = 1.0 / coarse.mean();
    let n = cfg.duration_ps as f64 * rate;
    let expected_pairs = (n * rate * bin_ps * a.max(1e-3)).max(1.0);
    Ok(Some(StepHalvingReport {
        g2_zero_bin: a,
        g2_zero_bin_halved: b,
        statistical_error: a.max(1e-3) / expected_pairs.sqrt(),
    }))
}
