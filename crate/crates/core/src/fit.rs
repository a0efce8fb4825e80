//! Log-log line fits: least-squares slopes, valid envelopes and drift tests.

use serde::{Deserialize, Serialize};

/// `y = intercept + slope * x`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

impl LineFit {
    pub fn at(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Ordinary least squares; `None` when fewer than two distinct abscissae.
pub fn least_squares(points: &[(f64, f64)]) -> Option<LineFit> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 1e-300) {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some(LineFit { slope, intercept: my - slope * mx })
}

/// Smallest intercept making `intercept + slope * x >= y` on every point.
pub fn envelope_intercept(points: &[(f64, f64)], slope: f64) -> f64 {
    points.iter().map(|&(x, y)| y - slope * x).fold(f64::NEG_INFINITY, f64::max)
}

/// Upper envelope line minimizing the mean gap above the points, with
/// `slope >= min_slope`. The optimum is the upper-hull edge spanning the mean
/// abscissa.
pub fn upper_envelope(points: &[(f64, f64)], min_slope: f64) -> Option<LineFit> {
    if points.is_empty() {
        return None;
    }
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for p in pts {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // drop b unless it lies strictly above segment a-p
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        if let Some(last) = hull.last() {
            if last.0 == p.0 {
                hull.pop();
            }
        }
        hull.push(p);
    }
    let mut slope = 0.0;
    if hull.len() >= 2 {
        let mut k = 0;
        while k + 2 < hull.len() && hull[k + 1].0 < mean_x {
            k += 1;
        }
        let (a, b) = (hull[k], hull[k + 1]);
        slope = (b.1 - a.1) / (b.0 - a.0);
    }
    let slope = slope.max(min_slope);
    Some(LineFit { slope, intercept: envelope_intercept(points, slope) })
}

/// Slope of the per-bin maxima of `residual` against `x` (bins of width
/// `bin_width`). Measures whether an envelope constant keeps growing with the
/// initial time; zero when fewer than two bins are populated.
pub fn drift(points: &[(f64, f64)], bin_width: f64) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let x0 = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let mut bins: std::collections::BTreeMap<i64, f64> = std::collections::BTreeMap::new();
    for &(x, y) in points {
        if !y.is_finite() {
            continue;
        }
        let k = ((x - x0) / bin_width + 1e-9).floor() as i64;
        let e = bins.entry(k).or_insert(f64::NEG_INFINITY);
        *e = e.max(y);
    }
    let maxima: Vec<(f64, f64)> = bins.into_iter().map(|(k, y)| (x0 + (k as f64 + 0.5) * bin_width, y)).collect();
    least_squares(&maxima).map_or(0.0, |f| f.slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn least_squares_recovers_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 2.0 - 0.5 * i as f64)).collect();
        let f = least_squares(&pts).unwrap();
        assert_abs_diff_eq!(f.slope, -0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(f.intercept, 2.0, epsilon = 1e-14);
        assert!(least_squares(&[(1.0, 1.0), (1.0, 2.0)]).is_none());
    }

    #[test]
    fn envelope_intercept_dominates() {
        let pts = [(0.0, 0.0), (1.0, 3.0), (2.0, 1.0)];
        let c = envelope_intercept(&pts, 1.0);
        assert_abs_diff_eq!(c, 2.0);
    }

    #[test]
    fn upper_envelope_of_oscillating_power() {
        // y = 0.5 * a(x) * x with a oscillating in [0, 1]
        let pts: Vec<(f64, f64)> = (0..400)
            .map(|i| {
                let x = i as f64 * 0.0175;
                let a = (std::f64::consts::FRAC_PI_2 * x).sin().powi(2);
                (x, 0.5 * a * x)
            })
            .collect();
        let f = upper_envelope(&pts, 0.0).unwrap();
        assert!((f.slope - 0.5).abs() < 0.02, "slope {}", f.slope);
        assert!(pts.iter().all(|&(x, y)| f.at(x) >= y - 1e-12));
    }

    #[test]
    fn upper_envelope_clamps_slope() {
        let pts = [(0.0, 1.0), (1.0, 0.0)];
        let f = upper_envelope(&pts, 0.0).unwrap();
        assert_eq!(f.slope, 0.0);
        assert_eq!(f.intercept, 1.0);
    }

    #[test]
    fn drift_detects_growing_maxima() {
        let pts: Vec<(f64, f64)> = (0..50).map(|i| (i as f64 * 0.1, i as f64 * 0.1)).collect();
        assert!((drift(&pts, 0.5) - 1.0).abs() < 1e-9);
        let flat: Vec<(f64, f64)> = (0..50).map(|i| (i as f64 * 0.1, (i % 3) as f64)).collect();
        assert!(drift(&flat, 0.5).abs() < 1e-9);
    }
}
