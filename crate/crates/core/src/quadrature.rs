//! Quadrature rules and polynomial interpolation used by the solvers.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Newton on `P_n`).
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// `(node, weight)` pairs mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p, dp)
}

/// Chebyshev points of the first kind on `(a, b)` with barycentric weights.
#[derive(Debug, Clone)]
pub struct ChebyshevInterpolant {
    pub nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl ChebyshevInterpolant {
    pub fn new(a: f64, b: f64, m: usize) -> Self {
        let mut nodes = Vec::with_capacity(m);
        let mut weights = Vec::with_capacity(m);
        for j in 0..m {
            let theta = (2 * j + 1) as f64 * PI / (2 * m) as f64;
            // ascending order
            nodes.push(0.5 * (a + b) - 0.5 * (b - a) * theta.cos());
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            weights.push(sign * theta.sin());
        }
        ChebyshevInterpolant { nodes, weights }
    }

    /// Lagrange basis values `l_j(x)`, so that `p(x) = sum_j l_j(x) p(x_j)`.
    pub fn basis(&self, x: f64) -> Vec<f64> {
        if let Some(j) = self.nodes.iter().position(|&n| n == x) {
            let mut out = vec![0.0; self.nodes.len()];
            out[j] = 1.0;
            return out;
        }
        let terms: Vec<f64> = self.nodes.iter().zip(&self.weights).map(|(&n, &w)| w / (x - n)).collect();
        let total: f64 = terms.iter().sum();
        terms.into_iter().map(|v| v / total).collect()
    }
}

/// Composite trapezoid rule on arbitrary nodes.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.windows(2).zip(y.windows(2)).map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1])).sum()
}

/// Running trapezoid integral `F(x_i) = int_{x_0}^{x_i} y`.
pub fn cumulative_trapezoid(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..x.len() {
        acc += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let rule = GaussLegendre::new(5);
        // degree 9 is the limit for 5 nodes
        let v = rule.integrate(0.0, 2.0, |x| x.powi(9));
        assert_abs_diff_eq!(v, 2f64.powi(10) / 10.0, epsilon = 1e-10);
        let w: f64 = rule.weights.iter().sum();
        assert_abs_diff_eq!(w, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn gauss_legendre_odd_rule_has_center_node() {
        let rule = GaussLegendre::new(3);
        assert_abs_diff_eq!(rule.nodes[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rule.weights[1], 8.0 / 9.0, epsilon = 1e-14);
    }

    #[test]
    fn chebyshev_interpolates_smooth_function() {
        let c = ChebyshevInterpolant::new(1.0, 2.0, 16);
        let values: Vec<f64> = c.nodes.iter().map(|&x| x.powf(-1.3)).collect();
        for &x in &[1.0, 1.17, 1.5, 1.99, 2.0] {
            let p: f64 = c.basis(x).iter().zip(&values).map(|(l, v)| l * v).sum();
            assert_abs_diff_eq!(p, f64::powf(x, -1.3), epsilon = 1e-11);
        }
    }

    #[test]
    fn trapezoid_is_exact_for_linear() {
        let x = [1.0, 1.5, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert_abs_diff_eq!(trapezoid(&x, &y), 18.0, epsilon = 1e-14);
        let c = cumulative_trapezoid(&x, &y);
        assert_abs_diff_eq!(c[3], 18.0, epsilon = 1e-14);
    }
}
