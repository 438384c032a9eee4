//! Shared oracles and helpers for the integration tests.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use nalgebra::{Matrix3, Vector3};

/// Optical Bloch equations for the Bloch vector (u, v, w), w = ρee − ρgg,
/// with ẋ = A·x + b.
pub fn bloch_system(t1: f64, t2: f64, omega: f64, delta: f64) -> (Matrix3<f64>, Vector3<f64>) {
    let a = Matrix3::new(
        -1.0 / t2, -delta, 0.0,
        delta, -1.0 / t2, omega,
        0.0, -omega, -1.0 / t1,
    );
    (a, Vector3::new(0.0, 0.0, -1.0 / t1))
}

/// Fixed point of the Bloch equations.
pub fn bloch_steady_state(t1: f64, t2: f64, omega: f64, delta: f64) -> Vector3<f64> {
    let (a, b) = bloch_system(t1, t2, omega, delta);
    -a.lu().solve(&b).expect("Bloch matrix is regular")
}

pub fn bloch_steady_rho_ee(t1: f64, t2: f64, omega: f64, delta: f64) -> f64 {
    0.5 * (1.0 + bloch_steady_state(t1, t2, omega, delta)[2])
}

/// Exact g²(τ): excited population a delay τ after a detection has reset
/// the emitter to its ground state, over the steady-state population.
pub fn bloch_g2(t1: f64, t2: f64, omega: f64, delta: f64, tau: f64) -> f64 {
    let (a, _) = bloch_system(t1, t2, omega, delta);
    let inf = bloch_steady_state(t1, t2, omega, delta);
    let ground = Vector3::new(0.0, 0.0, -1.0);
    let x = inf + (a * tau.abs()).exp() * (ground - inf);
    (1.0 + x[2]) / (1.0 + inf[2])
}

/// Ω for saturation parameter s.
pub fn rabi_for(s: f64, t1: f64, t2: f64) -> f64 {
    (s / (t1 * t2)).sqrt()
}

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

pub fn antibunch() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_antibunch"));
    c.stdin(Stdio::null());
    c
}

/// Runs the CLI in `dir` and returns its output.
pub fn run_in(dir: &Path, args: &[&str]) -> Output {
    antibunch().current_dir(dir).args(args).output().expect("binary runs")
}

pub fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Mean of `model` over the bin of width `w` centred at `t` (16-point
/// midpoint rule).
pub fn bin_average(model: &impl Fn(f64) -> f64, t: f64, w: f64) -> f64 {
    const N: usize = 16;
    (0..N).map(|k| model(t - 0.5 * w + (k as f64 + 0.5) * w / N as f64)).sum::<f64>() / N as f64
}

/// χ² of a normalised histogram against the bin averages of `model` over
/// |τ| ≤ reach, and the number of bins used.
pub fn chi2_against(h: &antibunch::correlator::CorrelationHistogram, reach: f64, model: impl Fn(f64) -> f64) -> (f64, usize) {
    let norm = h.normalized.as_ref().expect("normalized");
    let sig = h.sigma.as_ref().expect("sigma");
    let w = h.bin_width_ps() as f64;
    let mut chi2 = 0.0;
    let mut n = 0;
    for (i, tau) in h.tau_ps().into_iter().enumerate() {
        let t = tau as f64;
        if t.abs() <= reach {
            chi2 += ((norm[i] - bin_average(&model, t, w)) / sig[i]).powi(2);
            n += 1;
        }
    }
    (chi2, n)
}
