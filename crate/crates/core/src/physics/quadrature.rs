//! Adaptive Gauss–Kronrod (7/15) quadrature.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("quadrature did not converge on [{a}, {b}]: estimate {estimate}, error {error}")]
pub struct QuadratureError {
    pub a: f64,
    pub b: f64,
    pub estimate: f64,
    pub error: f64,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Integrates `f` over `[a, b]` to `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64, QuadratureError> {
    if a == b {
        return Ok(0.0);
    }
    let mut intervals = vec![{
        let (v, e) = kronrod(&f, a, b);
        (a, b, v, e)
    }];
    for _ in 0..2000 {
        let total: f64 = intervals.iter().map(|iv| iv.2).sum();
        let err: f64 = intervals.iter().map(|iv| iv.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        // Bisect the interval with the largest error estimate.
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (v1, e1) = kronrod(&f, lo, mid);
        let (v2, e2) = kronrod(&f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
    Err(QuadratureError {
        a,
        b,
        estimate: intervals.iter().map(|iv| iv.2).sum(),
        error: intervals.iter().map(|iv| iv.3).sum(),
    })
}

/// Integrates over consecutive break points, e.g. `[a, kink, b]`.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, points: &[f64], abs_tol: f64, rel_tol: f64) -> Result<f64, QuadratureError> {
    let mut total = 0.0;
    for w in points.windows(2) {
        total += integrate(&f, w[0], w[1], abs_tol, rel_tol)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v = integrate(|x| x.powi(5) - 3.0 * x * x, -1.0, 2.0, 1e-14, 1e-14).unwrap();
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0);
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn kink_handled_by_subdivision() {
        let v = integrate(|x: f64| x.abs(), -1.0, 3.0, 1e-12, 1e-12).unwrap();
        assert!((v - 5.0).abs() < 1e-10);
    }

    #[test]
    fn exponential_tail() {
        let v = integrate(|x: f64| (-x).exp(), 0.0, 50.0, 1e-14, 1e-13).unwrap();
        assert!((v - (1.0 - (-50.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn pathological_integrand_reports_failure() {
        let r = integrate(|x: f64| 1.0 / x.abs().sqrt().max(1e-300) * (1.0 / x).sin(), -1.0, 1.0, 1e-15, 1e-15);
        assert!(r.is_err());
    }
}
