//! Special functions needed by the exponential⊗Gaussian closed forms.

use libm::erfc;

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Scaled complementary error function exp(x²)·erfc(x).
pub fn erfcx(x: f64) -> f64 {
    if x < 10.0 {
        (x * x).exp() * erfc(x)
    } else {
        // Continued fraction, evaluated bottom-up; 60 levels is far past
        // convergence for x ≥ 10.
        let mut f = x;
        for n in (1..=60).rev() {
            f = x + 0.5 * n as f64 / f;
        }
        FRAC_1_SQRT_PI / f
    }
}

/// Gaussian density with zero mean and standard deviation `sigma`.
#[inline]
pub fn gaussian_pdf(x: f64, sigma: f64) -> f64 {
    let z = x / sigma;
    FRAC_1_SQRT_2PI / sigma * (-0.5 * z * z).exp()
}
