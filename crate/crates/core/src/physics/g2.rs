use super::convolution::{ExpShape, ExpSum, ExpTerm, TimeResponse};
use super::{EmitterParams, G2BackgroundModel};

/// Relative T₁/T₂ mismatch below which the weak-pump g² switches to its
/// equal-times limit 1 − (1 + |τ|/T)·exp(−|τ|/T).
pub const EQUAL_TIMES_RTOL: f64 = 1e-4;

/// Background-diluted antibunching 1 − ρ²·exp(−|τ|/t_m).
pub fn g2_background(tau: f64, m: &G2BackgroundModel) -> f64 {
    1.0 - m.rho * m.rho * (-tau.abs() / m.t_m).exp()
}

/// Weak-pump resonance-fluorescence g²(τ) of a two-level emitter.
pub fn g2_resonant_weak(tau: f64, e: &EmitterParams) -> f64 {
    ResonantWeakG2::new(e.t1, e.t2).value(tau)
}

/// Weak-pump g² as a sum of exponentials in |τ|.
///
/// The two pole amplitudes −T₂/(T₂−T₁) and T₁/(T₂−T₁) always sum to −1, so
/// g²(0) = 0 for every T₁ ≠ T₂.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonantWeakG2 {
    pub t1: f64,
    pub t2: f64,
}

impl ResonantWeakG2 {
    pub fn new(t1: f64, t2: f64) -> Self {
        ResonantWeakG2 { t1, t2 }
    }

    pub fn is_equal_times(&self) -> bool {
        (self.t1 / self.t2 - 1.0).abs() < EQUAL_TIMES_RTOL
    }

    pub fn terms(&self) -> ExpSum {
        let (t1, t2) = (self.t1, self.t2);
        if self.is_equal_times() {
            // The function is symmetric in T₁ ↔ T₂, so the mean is
            // second-order accurate inside the switch band.
            let t = 0.5 * (t1 + t2);
            ExpSum {
                constant: 1.0,
                terms: vec![
                    ExpTerm::new(-1.0, t, ExpShape::TwoSided),
                    ExpTerm::new(-1.0, t, ExpShape::TwoSidedLinear),
                ],
            }
        } else {
            let d = t2 - t1;
            ExpSum {
                constant: 1.0,
                terms: vec![
                    ExpTerm::new(-t2 / d, t2, ExpShape::TwoSided),
                    ExpTerm::new(t1 / d, t1, ExpShape::TwoSided),
                ],
            }
        }
    }
}

impl TimeResponse for ResonantWeakG2 {
    fn value(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        self.terms().value(t)
    }

    fn exp_sum(&self) -> Option<ExpSum> {
        Some(self.terms())
    }
}

impl TimeResponse for G2BackgroundModel {
    fn value(&self, t: f64) -> f64 {
        g2_background(t, self)
    }

    fn exp_sum(&self) -> Option<ExpSum> {
        Some(ExpSum {
            constant: 1.0,
            terms: vec![ExpTerm::new(-self.rho * self.rho, self.t_m, ExpShape::TwoSided)],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn background_examples() {
        let pure = G2BackgroundModel::new(1.0, 500.0).unwrap();
        assert_eq!(g2_background(0.0, &pure), 0.0);
        let mode = G2BackgroundModel::new(0.8f64.sqrt(), 500.0).unwrap();
        assert!((g2_background(0.0, &mode) - 0.20).abs() < 1e-12);
        let cross = G2BackgroundModel::new(0.9f64.sqrt(), 500.0).unwrap();
        assert!((g2_background(0.0, &cross) - 0.10).abs() < 1e-12);
        assert!((g2_background(1e6, &mode) - 1.0).abs() < 1e-12);
        assert_eq!(g2_background(-123.0, &mode), g2_background(123.0, &mode));
    }

    #[test]
    fn weak_pump_zero_delay_is_zero() {
        let e = EmitterParams::new(670.0, 460.0).unwrap();
        assert_eq!(g2_resonant_weak(0.0, &e), 0.0);
        // Pole sum without the τ=0 shortcut.
        let v = ResonantWeakG2::new(670.0, 460.0).terms().value(0.0);
        assert!(v.abs() < 1e-14);
    }

    #[test]
    fn weak_pump_two_pole_form_at_two_ns() {
        let e = EmitterParams::new(670.0, 460.0).unwrap();
        let v = g2_resonant_weak(2000.0, &e);
        assert!(v > 0.86 && v < 0.87, "{v}");
        // Direct evaluation of the two-pole form.
        let (t1, t2): (f64, f64) = (670.0, 460.0);
        let direct = 1.0 - (-2000.0 / t2).exp() / (1.0 - t1 / t2) - (-2000.0 / t1).exp() / (1.0 - t2 / t1);
        assert!((v - direct).abs() < 1e-14);
        let mut prev = 0.0;
        for i in 1..200 {
            let g = g2_resonant_weak(i as f64 * 25.0, &e);
            assert!(g >= prev - 1e-15);
            prev = g;
        }
    }

    #[test]
    fn equal_times_limit_matches_nearby_poles() {
        let t = 600.0;
        let lim = ResonantWeakG2::new(t, t);
        assert!(lim.is_equal_times());
        for &tau in &[0.0, 50.0, 300.0, 1000.0, 4000.0] {
            let closed = 1.0 - (1.0 + tau / t) * (-tau / t).exp();
            assert!((lim.value(tau) - closed).abs() < 1e-14);
            for &f in &[1.0 + 1e-6, 1.0 - 1e-6] {
                // Evaluate the pole form directly, bypassing the switch.
                let (t1, t2) = (t, t * f);
                let d = t2 - t1;
                let pole = 1.0 + (-t2 / d) * (-tau / t2).exp() + (t1 / d) * (-tau / t1).exp();
                assert!((pole - closed).abs() < 1e-6, "tau={tau} f={f}: {pole} vs {closed}");
            }
        }
    }

    #[test]
    fn branch_mismatch_small_across_switch() {
        let t1 = 500.0;
        for &tau in &[10.0, 400.0, 2000.0] {
            let inside = ResonantWeakG2::new(t1, t1 * (1.0 + 0.99 * EQUAL_TIMES_RTOL)).value(tau);
            let outside = ResonantWeakG2::new(t1, t1 * (1.0 + 1.01 * EQUAL_TIMES_RTOL)).value(tau);
            assert!((inside - outside).abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn weak_pump_bounded_and_symmetric(t1 in 50.0f64..5000.0, ratio in 0.01f64..2.0, tau in -2e4f64..2e4) {
            let e = EmitterParams::new(t1, t1 * ratio).unwrap();
            let g = g2_resonant_weak(tau, &e);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&g), "g={}", g);
            prop_assert!((g - g2_resonant_weak(-tau, &e)).abs() < 1e-15);
        }

        #[test]
        fn background_bounded(rho in 0.0f64..=1.0, tm in 1.0f64..5000.0, tau in -2e4f64..2e4) {
            let m = G2BackgroundModel::new(rho, tm).unwrap();
            let g = g2_background(tau, &m);
            prop_assert!(g >= 1.0 - rho * rho - 1e-15 && g <= 1.0);
        }
    }
}
