use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::function::{node_norms, sliding_l1_from_values, GridFunction};
use crate::dichotomy::ProjectionFamily;
use crate::error::{Error, Result};
use crate::evolution::EvolutionFamily;
use crate::fit::least_squares;
use crate::linalg::{projection_range, restricted_inverse, Mat, Vector};
use crate::norms::NormFamily;
use crate::quadrature::GaussLegendre;

/// How `int_tau^t (1/s) T(t,s) y(s) ds` is evaluated when checking a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifyMode {
    /// trapezoid rule on the nodes of `y`
    Grid,
    /// Gauss-Legendre on every node interval applied to the interpolated `y`
    Reference,
}

/// Dichotomy constants entering the bound `2 D (1 + 1/lambda) ||y||_L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DichotomyConstants {
    pub d: f64,
    pub lambda: f64,
}

impl DichotomyConstants {
    pub fn bound_factor(&self) -> f64 {
        2.0 * self.d * (1.0 + 1.0 / self.lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenOptions {
    pub constants: Option<DichotomyConstants>,
    /// tolerance on the normalized equation residual
    pub tol: f64,
    /// relative slack on the norm bound
    pub slack: f64,
    /// tolerance on `||P(1) x(1)||`
    pub initial_tol: f64,
    pub mode: VerifyMode,
    /// node subset size used for verification pairs
    pub verify_points: usize,
    /// growth of `||x(t)||_t` per unit `ln t` over the last decade, relative to
    /// `||y||_L`, above which `x` is declared unbounded
    pub growth_limit: f64,
}

impl Default for GreenOptions {
    fn default() -> Self {
        GreenOptions {
            constants: None,
            tol: 1e-6,
            slack: 0.05,
            initial_tol: 1e-8,
            mode: VerifyMode::Grid,
            verify_points: 24,
            growth_limit: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub y_norm_l: f64,
    pub x_norm_sup: f64,
    /// `||x||_inf / ||y||_L` (0 for `y = 0`)
    pub ratio: f64,
    pub bound: Option<f64>,
    pub bound_ok: Option<bool>,
    pub residual: f64,
    pub verify_mode: VerifyMode,
    pub initial_residual: f64,
    pub tail_estimate: Option<f64>,
    pub tail_dominant: bool,
    pub growth_slope: f64,
    pub bounded: bool,
    pub pass: bool,
}

/// Step data of a family on a fixed node set.
pub(crate) struct Kernel {
    nodes: Vec<f64>,
    /// `T(t_{k+1}, t_k)`
    steps: Vec<Mat>,
    /// `lim_{s -> t_{k+1}^-} T(t_{k+1}, s)`
    left: Vec<Mat>,
}

impl Kernel {
    fn new(family: &EvolutionFamily, nodes: &[f64]) -> Result<Self> {
        let steps = family.step_maps(nodes)?;
        let left = nodes.par_windows(2).map(|w| family.left_limit(w[1], w[0])).collect::<Result<Vec<_>>>()?;
        Ok(Kernel { nodes: nodes.to_vec(), steps, left })
    }

    /// Local defects `x_{k+1} - T x_k - trapezoid`, with forcing `f = y / t`.
    fn defects(&self, x: &GridFunction, y: &GridFunction) -> Vec<Vector> {
        let (xs, ys) = (x.values(), y.values());
        (0..self.steps.len())
            .into_par_iter()
            .map(|k| {
                let h = self.nodes[k + 1] - self.nodes[k];
                let f0 = &ys[k] / self.nodes[k];
                let f1 = &ys[k + 1] / self.nodes[k + 1];
                let phi = &self.steps[k];
                &xs[k + 1] - phi * &xs[k] - (phi * f0 + &self.left[k] * f1) * (0.5 * h)
            })
            .collect()
    }

    fn check(&self, f: &GridFunction) -> Result<()> {
        if f.nodes() != self.nodes.as_slice() {
            return Err(Error::invalid("grid function nodes differ from the solver grid"));
        }
        Ok(())
    }

    fn indices(&self, pairs: &[(f64, f64)]) -> Result<Vec<(usize, usize)>> {
        pairs
            .iter()
            .map(|&(tau, t)| {
                if !(tau <= t) {
                    return Err(Error::Domain { t, tau });
                }
                Ok((nearest(&self.nodes, tau), nearest(&self.nodes, t)))
            })
            .collect()
    }

    /// Largest `||x(t) - T(t,tau) x(tau) - int_tau^t (1/s) T(t,s) y(s) ds||`
    /// over the pairs, divided by `1 + max ||x||`.
    fn residual(
        &self,
        family: &EvolutionFamily,
        x: &GridFunction,
        y: &GridFunction,
        pairs: &[(f64, f64)],
        mode: VerifyMode,
    ) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        let idx = self.indices(pairs)?;
        let scale = 1.0 + x.max_euclidean();
        let worst = match mode {
            VerifyMode::Grid => {
                let defects = self.defects(x, y);
                let mut starts: Vec<usize> = idx.iter().map(|p| p.0).collect();
                starts.sort_unstable();
                starts.dedup();
                let per_start: Vec<f64> = starts
                    .par_iter()
                    .map(|&i| {
                        let mut ends: Vec<usize> = idx.iter().filter(|p| p.0 == i).map(|p| p.1).collect();
                        ends.sort_unstable();
                        let last = *ends.last().expect("each start has an end");
                        let mut r = Vector::zeros(x.dim());
                        let mut worst = 0.0f64;
                        let mut e = ends.iter().peekable();
                        while e.peek() == Some(&&i) {
                            e.next();
                        }
                        for (k, (step, defect)) in self.steps.iter().zip(defects.iter()).enumerate().take(last).skip(i)
                        {
                            r = step * r + defect;
                            while e.peek() == Some(&&(k + 1)) {
                                worst = worst.max(r.norm());
                                e.next();
                            }
                        }
                        worst
                    })
                    .collect();
                per_start.into_iter().fold(0.0, f64::max)
            }
            VerifyMode::Reference => {
                let rule = GaussLegendre::new(8);
                let per_pair: Vec<f64> = idx
                    .par_iter()
                    .map(|&(i, j)| self.reference_residual(family, &rule, x, y, i, j))
                    .collect::<Result<_>>()?;
                per_pair.into_iter().fold(0.0, f64::max)
            }
        };
        Ok(worst / scale)
    }

    fn reference_residual(
        &self,
        family: &EvolutionFamily,
        rule: &GaussLegendre,
        x: &GridFunction,
        y: &GridFunction,
        i: usize,
        j: usize,
    ) -> Result<f64> {
        let d = x.dim();
        // m = T(t_j, t_{k+1}) while walking k downwards
        let mut m = Mat::identity(d, d);
        let mut integral = Vector::zeros(d);
        for k in (i..j).rev() {
            let (a, b) = (self.nodes[k], self.nodes[k + 1]);
            let mut local = Vector::zeros(d);
            for (s, w) in rule.mapped(a, b) {
                local += family.evaluate(b, s)? * y.eval(s) * (w / s);
            }
            integral += &m * local;
            m *= &self.steps[k];
        }
        Ok((&x.values()[j] - m * &x.values()[i] - integral).norm())
    }
}

fn nearest(nodes: &[f64], t: f64) -> usize {
    let k = nodes.partition_point(|&s| s < t);
    if k == 0 {
        0
    } else if k >= nodes.len() {
        nodes.len() - 1
    } else if (nodes[k] - t) < (t - nodes[k - 1]) {
        k
    } else {
        k - 1
    }
}

/// Pairs `(tau, t)`, `tau <= t`, over a log-spread subset of `count` nodes.
pub fn default_verification_pairs(nodes: &[f64], count: usize) -> Vec<(f64, f64)> {
    let n = nodes.len();
    let count = count.clamp(2, n);
    let mut idx: Vec<usize> = (0..count)
        .map(|k| {
            let frac = k as f64 / (count - 1) as f64;
            (((n - 1) as f64) * frac).round() as usize
        })
        .collect();
    idx.dedup();
    let mut pairs = Vec::new();
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            pairs.push((nodes[i], nodes[j]));
        }
    }
    pairs
}

/// Green operator of the admissibility equation for a fixed family,
/// splitting and grid: `x = x2 - x1` with
/// `x2(t) = int_1^t (1/s) T(t,s) P(s) y(s) ds` and
/// `x1(t) = int_t^{t_max} (1/s) T(t,s) Q(s) y(s) ds` (backward maps on `Ker P`).
pub struct GreenSolver {
    family: EvolutionFamily,
    kernel: Kernel,
    p: Vec<Mat>,
    q: Vec<Mat>,
    /// `T(t_k, t_{k+1})` on `Ker P(t_{k+1})`
    back: Vec<Mat>,
    rank: usize,
}

impl GreenSolver {
    pub fn new(family: &EvolutionFamily, proj: &ProjectionFamily, nodes: &[f64]) -> Result<Self> {
        let d = family.dim();
        if proj.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: proj.dim() });
        }
        let kernel = Kernel::new(family, nodes)?;
        let p: Vec<Mat> = nodes.par_iter().map(|&t| proj.at(t)).collect::<Result<_>>()?;
        let q: Vec<Mat> = p.iter().map(|p| Mat::identity(d, d) - p).collect();
        let back = if proj.rank() < d {
            (0..kernel.steps.len())
                .into_par_iter()
                .map(|k| {
                    let basis = projection_range(&q[k]);
                    restricted_inverse(&kernel.steps[k], &basis, nodes[k], nodes[k + 1])
                })
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        Ok(GreenSolver { family: family.clone(), kernel, p, q, back, rank: proj.rank() })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.kernel.nodes
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    pub fn has_unstable(&self) -> bool {
        self.rank < self.dim()
    }

    pub fn solve(&self, y: &GridFunction) -> Result<GridFunction> {
        self.kernel.check(y)?;
        if y.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: y.dim() });
        }
        let t = &self.kernel.nodes;
        let n = t.len();
        let d = self.dim();
        let f: Vec<Vector> = y.values().iter().zip(t).map(|(v, &s)| v / s).collect();
        let mut forward = vec![Vector::zeros(d); n];
        if self.rank > 0 {
            for k in 0..n - 1 {
                let h = t[k + 1] - t[k];
                let phi = &self.kernel.steps[k];
                let src = phi * (&self.p[k] * &f[k]) + &self.kernel.left[k] * (&self.p[k + 1] * &f[k + 1]);
                forward[k + 1] = phi * &forward[k] + src * (0.5 * h);
            }
        }
        let mut backward = vec![Vector::zeros(d); n];
        if self.has_unstable() {
            for k in (0..n - 1).rev() {
                let h = t[k + 1] - t[k];
                let b = &self.back[k];
                let src = &self.q[k] * &f[k] + b * (&self.q[k + 1] * &f[k + 1]);
                backward[k] = b * &backward[k + 1] + src * (0.5 * h);
            }
        }
        let values = forward.into_iter().zip(backward).map(|(a, b)| a - b).collect();
        GridFunction::new(t.clone(), values)
    }

    pub fn verify(&self, x: &GridFunction, y: &GridFunction, pairs: &[(f64, f64)], mode: VerifyMode) -> Result<f64> {
        self.kernel.residual(&self.family, x, y, pairs, mode)
    }

    /// Solves and assembles the report.
    pub fn solve_with_report(
        &self,
        y: &GridFunction,
        norms: &NormFamily,
        options: &GreenOptions,
    ) -> Result<(GridFunction, AdmissibilityReport)> {
        let x = self.solve(y)?;
        let report = self.report(&x, y, norms, options)?;
        Ok((x, report))
    }

    pub fn report(
        &self,
        x: &GridFunction,
        y: &GridFunction,
        norms: &NormFamily,
        options: &GreenOptions,
    ) -> Result<AdmissibilityReport> {
        let t = &self.kernel.nodes;
        let gy = node_norms(y, norms)?;
        let gx = node_norms(x, norms)?;
        let y_norm_l = sliding_l1_from_values(t, &gy)?;
        let x_norm_sup = gx.iter().cloned().fold(0.0, f64::max);
        let pairs = default_verification_pairs(t, options.verify_points);
        let residual = self.verify(x, y, &pairs, options.mode)?;
        let initial_residual = (&self.p[0] * &x.values()[0]).norm();
        let bound = options.constants.map(|c| c.bound_factor() * y_norm_l);
        let bound_ok = bound.map(|b| x_norm_sup <= b * (1.0 + options.slack) + 1e-300);
        let t_max = *t.last().expect("non-empty grid");
        let tail_estimate = match (self.has_unstable(), options.constants) {
            (true, Some(c)) => Some(c.d * t_max.powf(-c.lambda) * y_norm_l / c.lambda),
            (false, _) => Some(0.0),
            _ => None,
        };
        let tail_dominant = tail_estimate.is_some_and(|e| e > 0.1 * x_norm_sup && e > 0.0);
        let late: Vec<(f64, f64)> =
            t.iter().zip(&gx).filter(|(&s, _)| s >= t_max / 10.0).map(|(&s, &v)| (s.ln(), v)).collect();
        let growth_slope = if y_norm_l > 0.0 { least_squares(&late).map_or(0.0, |f| f.slope) / y_norm_l } else { 0.0 };
        let bounded = growth_slope <= options.growth_limit;
        let pass =
            residual <= options.tol && initial_residual <= options.initial_tol && bounded && bound_ok.unwrap_or(true);
        Ok(AdmissibilityReport {
            y_norm_l,
            x_norm_sup,
            ratio: if y_norm_l > 0.0 { x_norm_sup / y_norm_l } else { 0.0 },
            bound,
            bound_ok,
            residual,
            verify_mode: options.mode,
            initial_residual,
            tail_estimate,
            tail_dominant,
            growth_slope,
            bounded,
            pass,
        })
    }
}

/// One-shot Green solve on the nodes of `y`.
pub fn green_solve(
    family: &EvolutionFamily,
    proj: &ProjectionFamily,
    y: &GridFunction,
    norms: &NormFamily,
    options: &GreenOptions,
) -> Result<(GridFunction, AdmissibilityReport)> {
    GreenSolver::new(family, proj, y.nodes())?.solve_with_report(y, norms, options)
}

/// Equation residual of `(x, y)` over `pairs`, normalized by `1 + max ||x||`.
pub fn verify_solution(
    family: &EvolutionFamily,
    x: &GridFunction,
    y: &GridFunction,
    pairs: &[(f64, f64)],
    mode: VerifyMode,
) -> Result<f64> {
    Kernel::new(family, x.nodes())?.residual(family, x, y, pairs, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{scenario, ScenarioSpec};
    use crate::grid::TimeGrid;
    use crate::norms::constant_norm;
    use approx::assert_abs_diff_eq;

    fn setup(name: &str, t_max: f64) -> (EvolutionFamily, ProjectionFamily, TimeGrid) {
        let s = scenario(&ScenarioSpec::new(name)).unwrap();
        (s.family, s.projection.unwrap(), TimeGrid::new(t_max, 64).unwrap())
    }

    #[test]
    fn contraction_with_constant_forcing() {
        let (f, p, grid) = setup("scalar_contraction", 100.0);
        let y = GridFunction::from_fn(&grid, |_| Vector::from_element(1, 1.0)).unwrap();
        let opts = GreenOptions { constants: Some(DichotomyConstants { d: 1.0, lambda: 1.0 }), ..Default::default() };
        let (x, rep) = green_solve(&f, &p, &y, &constant_norm(1), &opts).unwrap();
        for (&t, v) in x.nodes().iter().zip(x.values()) {
            assert_abs_diff_eq!(v[0], 1.0 - 1.0 / t, epsilon = 1e-4);
        }
        assert!(rep.pass, "{rep:?}");
        assert!(rep.residual < 1e-12);
        assert_abs_diff_eq!(rep.x_norm_sup, 0.99, epsilon = 1e-4);
    }

    #[test]
    fn zero_forcing_gives_zero() {
        let (f, p, grid) = setup("diag_dichotomy", 100.0);
        let y = GridFunction::zeros(&grid, 2);
        let (x, rep) = green_solve(&f, &p, &y, &constant_norm(2), &GreenOptions::default()).unwrap();
        assert_eq!(x.max_euclidean(), 0.0);
        assert!(rep.pass);
    }

    #[test]
    fn homogeneous_orbit_has_small_residual() {
        let (f, _, grid) = setup("diag_dichotomy", 100.0);
        let x0 = Vector::from_vec(vec![1.0, 0.5]);
        let x = GridFunction::from_fn(&grid, |t| f.apply(t, 1.0, &x0).unwrap()).unwrap();
        let y = GridFunction::zeros(&grid, 2);
        let pairs = default_verification_pairs(grid.nodes(), 12);
        let r = verify_solution(&f, &x, &y, &pairs, VerifyMode::Grid).unwrap();
        assert!(r < 1e-12, "{r}");
    }

    #[test]
    fn corrupted_solution_is_detected() {
        let (f, p, grid) = setup("diag_dichotomy", 100.0);
        let y = GridFunction::from_fn(&grid, |_| Vector::from_vec(vec![1.0, 1.0])).unwrap();
        let solver = GreenSolver::new(&f, &p, grid.nodes()).unwrap();
        let x = solver.solve(&y).unwrap();
        let k = grid.len() / 2;
        let mut values = x.values().to_vec();
        values[k][0] += 0.1;
        let bad = GridFunction::new(x.nodes().to_vec(), values).unwrap();
        let pairs = vec![(1.0, grid.nodes()[k])];
        let r = solver.verify(&bad, &y, &pairs, VerifyMode::Grid).unwrap();
        assert!(r * (1.0 + bad.max_euclidean()) >= 0.09, "{r}");
    }

    #[test]
    fn neutral_family_is_unbounded() {
        let (f, p, grid) = setup("neutral", 1000.0);
        let y = GridFunction::from_fn(&grid, |_| Vector::from_element(1, 1.0)).unwrap();
        let (x, rep) = green_solve(&f, &p, &y, &constant_norm(1), &GreenOptions::default()).unwrap();
        assert_abs_diff_eq!(x.values().last().unwrap()[0], 1000f64.ln(), epsilon = 2e-3);
        assert!(!rep.bounded && !rep.pass);
    }

    #[test]
    fn expansion_backward_integral() {
        let (f, _, grid) = setup("scalar_expansion", 1000.0);
        let y = GridFunction::from_fn(&grid, |_| Vector::from_element(1, 1.0)).unwrap();
        let (x, rep) =
            green_solve(&f, &ProjectionFamily::zero(1), &y, &constant_norm(1), &GreenOptions::default()).unwrap();
        // x(t) = -int_t^T (1/s)(t/s) ds = t/T - 1
        for (&t, v) in x.nodes().iter().zip(x.values()) {
            assert_abs_diff_eq!(v[0], t / 1000.0 - 1.0, epsilon = 2e-3);
        }
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn reference_mode_is_second_order() {
        let (f, p, _) = setup("diag_dichotomy", 100.0);
        let mut residuals = Vec::new();
        for density in [64, 128] {
            let grid = TimeGrid::new(100.0, density).unwrap();
            let y = GridFunction::from_fn(&grid, |t| Vector::from_vec(vec![1.0, 1.0 / t])).unwrap();
            let solver = GreenSolver::new(&f, &p, grid.nodes()).unwrap();
            let x = solver.solve(&y).unwrap();
            let pairs = vec![(1.0, 10.0), (2.0, 100.0)];
            residuals.push(solver.verify(&x, &y, &pairs, VerifyMode::Reference).unwrap());
        }
        assert!(residuals[0] / residuals[1] >= 3.0, "{residuals:?}");
    }
}
