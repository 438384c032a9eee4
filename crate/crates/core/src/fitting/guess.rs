//! Heuristic starting points per model.
//!
//! - g² models: depth from the lowest point, time constant from the
//!   half-depth crossing of the dip.
//! - Lorentzians: centres at the highest local maxima, width from the
//!   half-maximum crossings of the highest peak.
//! - saturation: amplitude from the plateau, knee at the half-plateau power.
//! - TCSPC: origin at the half-rise, lifetime from the 1/e point after the peak.
//!
//! `x` must be sorted ascending.

use super::models::ModelId;

/// Equal-times weak-pump dip 1 − (1 + u)·e^{−u} reaches ½ at u ≈ 1.678.
const WEAK_HALF_DEPTH_U: f64 = 1.678_346_990_016_661_6;
/// Ratio assumed between the two weak-pump times in the starting point.
const WEAK_T2_OVER_T1: f64 = 0.7;
/// T₁, T₂ [ps] assumed for a saturation curve; only their product matters.
const SATURATION_TIMES_PS: (f64, f64) = (500.0, 500.0);

pub fn initial_guess(model: ModelId, x: &[f64], y: &[f64], irf_fwhm_ps: f64) -> Vec<f64> {
    match model {
        ModelId::G2BackgroundIrf => {
            let (depth, half) = dip(x, y);
            vec![depth.clamp(1e-3, 1.0).sqrt(), (half / std::f64::consts::LN_2).max(1.0), irf_fwhm_ps]
        }
        ModelId::G2ResonantWeakIrf => {
            let (_, half) = dip(x, y);
            let t = (half / WEAK_HALF_DEPTH_U).max(1.0);
            // Mean of the two times equals t.
            let t1 = 2.0 * t / (1.0 + WEAK_T2_OVER_T1);
            vec![t1, WEAK_T2_OVER_T1 * t1, irf_fwhm_ps]
        }
        ModelId::LorentzianSinglet => {
            let bg = min(y);
            let i = argmax(y);
            vec![y[i] - bg, x[i], half_width(x, y, i, bg), bg]
        }
        ModelId::LorentzianDoublet => doublet_guess(x, y),
        ModelId::Saturation => {
            let top = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let (t1, t2) = SATURATION_TIMES_PS;
            let amp = 2.0 * top;
            let knee = x
                .iter()
                .zip(y)
                .find(|(_, &v)| v >= 0.25 * amp)
                .map_or(x[x.len() / 2], |(&p, _)| p)
                .max(f64::MIN_POSITIVE);
            vec![t1, t2, 1.0 / (knee * t1 * t2), amp]
        }
        ModelId::TcspcDecayIrf => {
            let i = argmax(y);
            let head = (x.len() / 10).max(1);
            let bg = y[..head.min(i.max(1))].iter().sum::<f64>() / head.min(i.max(1)) as f64;
            let amp = y[i] - bg;
            let t0 = (0..=i).rev().find(|&j| y[j] - bg < 0.5 * amp).map_or(x[i], |j| x[j]);
            let tail = (i..x.len()).find(|&j| y[j] - bg < amp / std::f64::consts::E);
            let t1 = tail.map_or(0.25 * (x[x.len() - 1] - x[i]), |j| x[j] - x[i]).max(1.0);
            vec![amp.max(f64::MIN_POSITIVE), t1, t0, bg, irf_fwhm_ps]
        }
    }
}

fn min(y: &[f64]) -> f64 {
    y.iter().copied().fold(f64::INFINITY, f64::min)
}

fn argmax(y: &[f64]) -> usize {
    (0..y.len()).max_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap_or(0)
}

/// Depth 1 − g²_min and the smallest |τ| past the minimum where g² recovers
/// half of the depth.
fn dip(x: &[f64], y: &[f64]) -> (f64, f64) {
    let i0 = (0..x.len()).min_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs())).unwrap_or(0);
    // Average a few bins around zero against noise.
    let lo = i0.saturating_sub(1);
    let hi = (i0 + 2).min(y.len());
    let bottom = y[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
    let depth = 1.0 - bottom;
    let level = 1.0 - 0.5 * depth;
    let right = (i0..x.len()).find(|&j| y[j] >= level).map(|j| x[j].abs());
    let left = (0..=i0).rev().find(|&j| y[j] >= level).map(|j| x[j].abs());
    let half = match (left, right) {
        (Some(a), Some(b)) => 0.5 * (a + b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => 0.25 * (x[x.len() - 1] - x[0]).abs(),
    };
    (depth, half)
}

/// Full width at half maximum around peak `i` over background `bg`.
fn half_width(x: &[f64], y: &[f64], i: usize, bg: f64) -> f64 {
    let level = bg + 0.5 * (y[i] - bg);
    let right = (i..x.len()).find(|&j| y[j] < level).map_or(x[x.len() - 1], |j| x[j]);
    let left = (0..=i).rev().find(|&j| y[j] < level).map_or(x[0], |j| x[j]);
    (right - left).max(f64::EPSILON * x[i].abs().max(1.0))
}

fn doublet_guess(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 3).min(n);
            y[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let bg = min(&smooth);
    let mut maxima: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&i| smooth[i] > smooth[i - 1] && smooth[i] >= smooth[i + 1])
        .collect();
    maxima.sort_by(|&a, &b| smooth[b].total_cmp(&smooth[a]));
    let first = maxima.first().copied().unwrap_or_else(|| argmax(&smooth));
    let width = half_width(x, &smooth, first, bg);
    let second = maxima.get(1).copied();
    let (i1, i2) = match second {
        Some(j) if j < first => (j, first),
        Some(j) => (first, j),
        None => (first, first),
    };
    let (c1, c2) = if i1 == i2 {
        // One visible peak: start the components on either side of it.
        (x[i1] - 0.25 * width, x[i1] + 0.25 * width)
    } else {
        (x[i1], x[i2])
    };
    let fwhm = if i1 == i2 { 0.5 * width } else { width.min((c2 - c1).abs()) };
    vec![smooth[i1] - bg, c1, smooth[i2] - bg, c2, fwhm, bg]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn background_dip_guess_is_close() {
        let m = ModelId::G2BackgroundIrf.model();
        let x: Vec<f64> = (-100..=100).map(|i| i as f64 * 20.0).collect();
        let y: Vec<f64> = x.iter().map(|&t| m.value(t, &[0.8f64.sqrt(), 500.0, 0.0])).collect();
        let g = initial_guess(ModelId::G2BackgroundIrf, &x, &y, 0.0);
        assert!((g[0] * g[0] - 0.8).abs() < 0.05);
        assert!((g[1] - 500.0).abs() < 40.0, "{g:?}");
    }

    #[test]
    fn doublet_guess_finds_both_peaks() {
        let m = ModelId::LorentzianDoublet.model();
        let x: Vec<f64> = (-200..=200).map(|i| i as f64 * 0.1).collect();
        let p = [1.0, -5.65, 0.8, 5.65, 4.0, 0.02];
        let y: Vec<f64> = x.iter().map(|&e| m.value(e, &p)).collect();
        let g = initial_guess(ModelId::LorentzianDoublet, &x, &y, 0.0);
        assert!((g[1] + 5.65).abs() < 0.5 && (g[3] - 5.65).abs() < 0.5, "{g:?}");
    }

    #[test]
    fn tcspc_guess_is_close() {
        let m = ModelId::TcspcDecayIrf.model();
        let x: Vec<f64> = (0..400).map(|i| i as f64 * 16.0).collect();
        let p = [1.0, 650.0, 1000.0, 0.01, 100.0];
        let y: Vec<f64> = x.iter().map(|&t| m.value(t, &p)).collect();
        let g = initial_guess(ModelId::TcspcDecayIrf, &x, &y, 100.0);
        assert!((g[1] - 650.0).abs() < 100.0 && (g[2] - 1000.0).abs() < 50.0, "{g:?}");
    }
}
