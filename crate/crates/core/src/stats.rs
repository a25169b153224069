//! Small statistics helpers used by the Monte Carlo layer.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes / trials` at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * libm::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Type-7 sample quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        len => {
            let h = (len - 1) as f64 * q.clamp(0.0, 1.0);
            let lo = libm::floor(h) as usize;
            let hi = (lo + 1).min(len - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

/// Weighted least-squares line `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope from the weights as inverse variances.
    pub slope_se: f64,
    pub points: usize,
}

/// Fits with weights treated as inverse variances. Needs two distinct `x`.
pub fn weighted_line_fit(x: &[f64], y: &[f64], w: &[f64]) -> Option<LineFit> {
    let sw: f64 = w.iter().sum();
    if x.len() < 2 || x.len() != y.len() || x.len() != w.len() || !(sw > 0.0) {
        return None;
    }
    let mx = x.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(x, w)| w * (x - mx) * (x - mx)).sum();
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((x, y), w)| w * (x - mx) * (y - my)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    Some(LineFit { slope, intercept: my - slope * mx, slope_se: libm::sqrt(1.0 / sxx), points: x.len() })
}

/// Log-log fit of failure frequencies `successes[i] / trials[i]` against
/// `scale[i]`. Points with zero successes are dropped; the rest carry the
/// delta-method weight `n p / (1 - p)` with `p = (s + 1/2) / (n + 1)`.
pub fn log_log_fit(scale: &[f64], successes: &[u64], trials: &[u64]) -> Option<LineFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for ((&t, &s), &n) in scale.iter().zip(successes).zip(trials) {
        if s == 0 || n == 0 || !(t > 0.0) {
            continue;
        }
        let p_hat = s as f64 / n as f64;
        let p_smooth = (s as f64 + 0.5) / (n as f64 + 1.0);
        xs.push(libm::log(t));
        ys.push(libm::log(p_hat));
        ws.push(n as f64 * p_smooth / (1.0 - p_smooth));
    }
    weighted_line_fit(&xs, &ys, &ws)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_known_value() {
        // 50/100 at z = 1.96: 0.4038 .. 0.5962
        let (lo, hi) = wilson_interval(50, 100, Z95);
        assert!((lo - 0.403_831).abs() < 1e-5 && (hi - 0.596_169).abs() < 1e-5, "{lo} {hi}");
        let (lo, hi) = wilson_interval(0, 10, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.2 && hi < 0.35);
        assert_eq!(wilson_interval(0, 0, Z95), (0.0, 1.0));
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&v, 0.5), 3.0);
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 5.0);
        assert!((quantile_sorted(&v, 0.05) - 1.2).abs() < 1e-12);
        assert!(quantile_sorted(&[], 0.5).is_nan());
    }

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: alloc::vec::Vec<f64> = x.iter().map(|x| 1.0 - 2.0 * x).collect();
        let f = weighted_line_fit(&x, &y, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!(weighted_line_fit(&[1.0, 1.0], &[0.0, 1.0], &[1.0, 1.0]).is_none());
    }

    #[test]
    fn power_law_recovered() {
        let t = [1.0, 2.0, 4.0, 8.0];
        let n = [1_000_000u64; 4];
        let s: alloc::vec::Vec<u64> = t.iter().map(|t| (1e5 / (t * t)) as u64).collect();
        let f = log_log_fit(&t, &s, &n).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-3, "{}", f.slope);
        let f = log_log_fit(&[1.0, 2.0, 4.0], &[10, 0, 3], &[100; 3]).unwrap();
        assert_eq!(f.points, 2);
    }
}
