//! Perturbations `B(t)` with `||B(t)|| <= c / t^(1+eps)`, the perturbed
//! family `U(t,tau) = T(t,tau) + int_tau^t T(t,s) B(s) U(s,tau) ds`, and the
//! estimates that keep a dichotomy alive under small `c`.

mod experiment;
mod picard;

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admissibility::{sliding_l1_norm, sup_norm, GridFunction};
use crate::error::{Error, Result};
use crate::evolution::{from_generator, EvolutionFamily, FamilyKind, MatFn};
use crate::grid::{log_spaced, SamplePairs};
use crate::linalg::{op_norm, Mat};
use crate::norms::NormFamily;
use crate::quadrature::GaussLegendre;

pub use experiment::{robustness_experiment, RobustnessConfig, RobustnessRow, RobustnessTable};
pub use picard::PicardSettings;

/// `B(t) = scale * shape(t)` with declared constants `(c, eps)`.
#[derive(Clone)]
pub struct PerturbationFamily {
    dim: usize,
    c: f64,
    epsilon: f64,
    scale: f64,
    shape: MatFn,
    label: String,
}

impl std::fmt::Debug for PerturbationFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PerturbationFamily")
            .field("dim", &self.dim)
            .field("c", &self.c)
            .field("epsilon", &self.epsilon)
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

impl PerturbationFamily {
    /// Arbitrary `B` with declared `(c, eps)`.
    pub fn from_fn<F>(dim: usize, c: f64, epsilon: f64, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Mat + Send + Sync + 'static,
    {
        if !(c >= 0.0) || !(epsilon >= 0.0) {
            return Err(Error::invalid(format!("perturbation constants need c >= 0, eps >= 0 (got {c}, {epsilon})")));
        }
        Ok(PerturbationFamily { dim, c, epsilon, scale: 1.0, shape: Arc::new(f), label: "custom".into() })
    }

    /// `B(t) = c / t^(1+eps) Id`.
    pub fn scaled_identity(dim: usize, c: f64, epsilon: f64) -> Result<Self> {
        let mut b = Self::from_fn(dim, 1.0, epsilon, move |t| Mat::identity(dim, dim) * t.powf(-1.0 - epsilon))?;
        b.label = format!("c/t^{}*Id", 1.0 + epsilon);
        b.with_c(c)
    }

    pub fn zero(dim: usize) -> Self {
        PerturbationFamily {
            dim,
            c: 0.0,
            epsilon: 0.0,
            scale: 0.0,
            shape: Arc::new(move |_| Mat::zeros(dim, dim)),
            label: "zero".into(),
        }
    }

    /// Rescales `B` so that its declared constant becomes `c`.
    pub fn with_c(&self, c: f64) -> Result<Self> {
        if !(c >= 0.0) {
            return Err(Error::invalid(format!("c must be non-negative, got {c}")));
        }
        if self.c == 0.0 {
            if c == 0.0 {
                return Ok(self.clone());
            }
            return Err(Error::invalid("cannot rescale a perturbation declared with c = 0"));
        }
        let mut out = self.clone();
        out.scale = self.scale * c / self.c;
        out.c = c;
        Ok(out)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_zero(&self) -> bool {
        self.scale == 0.0
    }

    pub fn at(&self, t: f64) -> Mat {
        (self.shape)(t) * self.scale
    }

    pub fn as_fn(&self) -> MatFn {
        let (shape, scale) = (Arc::clone(&self.shape), self.scale);
        Arc::new(move |t| shape(t) * scale)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationBoundReport {
    /// `max_t ||B(t)|| t^(1+eps)`
    pub max_scaled: f64,
    pub worst_t: f64,
    pub c: f64,
    pub pass: bool,
}

pub fn check_perturbation_bound(b: &PerturbationFamily, times: &[f64]) -> PerturbationBoundReport {
    let (worst_t, max_scaled) = times
        .iter()
        .map(|&t| (t, op_norm(&b.at(t)) * t.powf(1.0 + b.epsilon)))
        .fold((f64::NAN, 0.0), |acc, v| if v.1 > acc.1 { v } else { acc });
    PerturbationBoundReport { max_scaled, worst_t, c: b.c, pass: max_scaled <= b.c * (1.0 + 1e-12) }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationRoute {
    /// generator route when the family has a generator, Picard otherwise
    Auto,
    Generator,
    Picard,
}

/// Key under which the integral-identity residual is stored in the metadata
/// of a perturbed family.
pub const INTEGRAL_RESIDUAL_KEY: &str = "integral_residual";

/// `U = T + int T B U`. Generator families get the generator `A + B`; others
/// go through Picard iteration. The integral identity is checked on a few
/// pairs in `[1, t_max]` and the residual attached as metadata.
pub fn perturbed_family(
    family: &EvolutionFamily,
    b: &PerturbationFamily,
    route: PerturbationRoute,
    settings: &PicardSettings,
    t_max: f64,
) -> Result<EvolutionFamily> {
    if b.dim() != family.dim() {
        return Err(Error::DimensionMismatch { expected: family.dim(), found: b.dim() });
    }
    let label = format!("{}+{}", family.label(), b.label());
    if b.is_zero() {
        return Ok(family.clone().with_label(label).with_metadata(INTEGRAL_RESIDUAL_KEY, 0.0));
    }
    let use_generator = match route {
        PerturbationRoute::Auto => family.generator().is_some(),
        PerturbationRoute::Generator => {
            if family.generator().is_none() {
                return Err(Error::invalid("generator route needs a generator-defined family"));
            }
            true
        }
        PerturbationRoute::Picard => false,
    };
    let u = if use_generator {
        let a = Arc::clone(family.generator().expect("checked above"));
        let bf = b.as_fn();
        let settings = family.integrator_settings().copied().unwrap_or_default();
        from_generator(Arc::new(move |t| a(t) + bf(t)), family.dim(), settings)
    } else {
        let prop = picard::PicardPropagator::new(family.clone(), b.as_fn(), *settings)?;
        EvolutionFamily::custom(family.dim(), FamilyKind::Perturbed, "picard", Arc::new(prop))
    };
    let u = u.with_label(label);
    let residual = integral_identity_residual(family, &u, b, &identity_pairs(t_max))?;
    Ok(u.with_metadata(INTEGRAL_RESIDUAL_KEY, residual))
}

fn identity_pairs(t_max: f64) -> Vec<(f64, f64)> {
    [(1.0, 10.0), (1.0, 100.0), (2.0, 64.0), (8.0, 512.0), (1.0, 1000.0)]
        .into_iter()
        .filter(|&(_, t)| t <= t_max)
        .collect()
}

/// Largest `||U - T - int T B U|| / max(1, ||U||)` over the pairs, the
/// integral by 16-point Gauss-Legendre on log panels of ratio `2^(1/8)`.
pub fn integral_identity_residual(
    family: &EvolutionFamily,
    perturbed: &EvolutionFamily,
    b: &PerturbationFamily,
    pairs: &[(f64, f64)],
) -> Result<f64> {
    let rule = GaussLegendre::new(16);
    let per_pair: Vec<f64> = pairs
        .par_iter()
        .map(|&(tau, t)| {
            let u = perturbed.evaluate(t, tau)?;
            let panels = ((t / tau).ln() / 2f64.ln() * 8.0).ceil().max(1.0) as usize;
            let edges = log_spaced(tau, t, panels + 1);
            let mut integral = Mat::zeros(family.dim(), family.dim());
            for w in edges.windows(2) {
                for (s, wt) in rule.mapped(w[0], w[1]) {
                    integral += family.evaluate(t, s)? * b.at(s) * perturbed.evaluate(s, tau)? * wt;
                }
            }
            let defect = &u - family.evaluate(t, tau)? - integral;
            Ok(op_norm(&defect) / op_norm(&u).max(1.0))
        })
        .collect::<Result<_>>()?;
    Ok(per_pair.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorDReport {
    /// `max ||D x||_L / ||x||_inf` over the battery, `(D x)(t) = t B(t) x(t)`
    pub max_ratio: f64,
    /// `c C`
    pub bound: f64,
    pub pass: bool,
}

pub fn check_operator_d_estimate(
    b: &PerturbationFamily,
    norms: &NormFamily,
    battery: &[GridFunction],
) -> Result<OperatorDReport> {
    let big_c = norms
        .constants()
        .ok_or_else(|| Error::invalid("the operator estimate needs a norm family with known constants"))?
        .c;
    let ratios: Vec<f64> = battery
        .par_iter()
        .map(|x| {
            let values = x.nodes().iter().zip(x.values()).map(|(&t, v)| b.at(t) * v * t).collect();
            let dx = GridFunction::new(x.nodes().to_vec(), values)?;
            let sup = sup_norm(x, norms)?;
            if sup == 0.0 {
                return Ok(0.0);
            }
            Ok(sliding_l1_norm(&dx, norms)? / sup)
        })
        .collect::<Result<_>>()?;
    let max_ratio = ratios.into_iter().fold(0.0, f64::max);
    let bound = b.c() * big_c;
    Ok(OperatorDReport { max_ratio, bound, pass: max_ratio <= bound * (1.0 + 1e-9) + 1e-15 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    /// `a + c C M`
    pub exponent: f64,
    pub m: f64,
    /// `max log(||U x||_t / ||x||_tau) - log M - exponent log(t/tau)`
    pub max_excess: f64,
    pub pass: bool,
}

/// Checks `||U(t,tau) x||_t <= M (t/tau)^(a + c C M) ||x||_tau` on samples.
#[allow(clippy::too_many_arguments)]
pub fn gronwall_growth_check(
    u: &EvolutionFamily,
    norms: &NormFamily,
    m: f64,
    a: f64,
    c: f64,
    big_c: f64,
    samples: &SamplePairs,
    tol: f64,
) -> Result<GronwallReport> {
    let exponent = a + c * big_c * m;
    let excess: Vec<f64> = samples
        .pairs
        .par_iter()
        .map(|&(tau, t)| {
            let mat = u.evaluate(t, tau)?;
            let mut worst = f64::NEG_INFINITY;
            for x in &samples.vectors {
                let num = norms.norm(t, &(&mat * x))?;
                let den = norms.norm(tau, x)?;
                if num > 0.0 && den > 0.0 {
                    worst = worst.max((num / den).ln() - m.ln() - exponent * (t / tau).ln());
                }
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    let max_excess = excess.into_iter().fold(f64::NEG_INFINITY, f64::max);
    Ok(GronwallReport { exponent, m, max_excess, pass: max_excess <= (1.0 + tol).ln() })
}

/// `c, lambda_stable, lambda_unstable, D, verdict` per sweep entry.
pub fn write_sweep_csv<W: Write>(table: &RobustnessTable, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["c", "lambda_stable", "lambda_unstable", "D", "verdict"])?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for row in &table.rows {
        wtr.write_record(&[
            row.c.to_string(),
            opt(row.lambda_stable),
            opt(row.lambda_unstable),
            row.d.to_string(),
            if row.pass { "pass".into() } else { "fail".into() },
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{scenario, ScenarioSpec};
    use crate::grid::SampleConfig;
    use crate::linalg::Vector;
    use crate::norms::constant_norm;
    use approx::assert_abs_diff_eq;

    fn contraction(generator: bool) -> EvolutionFamily {
        let g = if generator { 1.0 } else { 0.0 };
        scenario(&ScenarioSpec::new("scalar_contraction").with("generator", g)).unwrap().family
    }

    #[test]
    fn perturbation_bounds() {
        let times = log_spaced(1.0, 1000.0, 50);
        let b = PerturbationFamily::scaled_identity(2, 0.3, 0.0).unwrap();
        let r = check_perturbation_bound(&b, &times);
        assert!(r.pass);
        assert_abs_diff_eq!(r.max_scaled, 0.3, epsilon = 1e-12);
        assert_eq!(check_perturbation_bound(&PerturbationFamily::zero(2), &times).max_scaled, 0.0);
        let bad = PerturbationFamily::from_fn(1, 0.1, 0.5, |t| Mat::from_element(1, 1, 0.2 * t.powf(-1.5))).unwrap();
        let r = check_perturbation_bound(&bad, &times);
        assert!(!r.pass);
        assert_abs_diff_eq!(r.max_scaled, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn picard_matches_scalar_oracle() {
        let c = 0.1;
        let b = PerturbationFamily::scaled_identity(1, c, 0.0).unwrap();
        let u =
            perturbed_family(&contraction(false), &b, PerturbationRoute::Picard, &PicardSettings::default(), 1000.0)
                .unwrap();
        assert_eq!(u.kind(), FamilyKind::Perturbed);
        for &(t, tau) in &[(7.3f64, 1.0f64), (100.0, 3.7), (950.0, 12.0), (1.5, 1.4)] {
            let exact = (tau / t).powf(1.0 - c);
            assert_abs_diff_eq!(u.evaluate(t, tau).unwrap()[(0, 0)], exact, epsilon = 1e-9 * exact.max(1e-3));
        }
        assert!(u.metadata()[INTEGRAL_RESIDUAL_KEY] < 1e-7);
    }

    #[test]
    fn routes_agree() {
        let b = PerturbationFamily::scaled_identity(1, 0.05, 0.0).unwrap();
        let s = PicardSettings::default();
        let g = perturbed_family(&contraction(true), &b, PerturbationRoute::Auto, &s, 1000.0).unwrap();
        let p = perturbed_family(&contraction(false), &b, PerturbationRoute::Auto, &s, 1000.0).unwrap();
        assert_eq!(g.kind(), FamilyKind::Generator);
        for &(t, tau) in &[(10.0, 1.0), (500.0, 5.0)] {
            let diff = (g.evaluate(t, tau).unwrap() - p.evaluate(t, tau).unwrap()).amax();
            assert!(diff < 1e-7, "{diff}");
        }
    }

    #[test]
    fn zero_perturbation_is_identity_map() {
        let f = contraction(false);
        let u = perturbed_family(
            &f,
            &PerturbationFamily::zero(1),
            PerturbationRoute::Auto,
            &PicardSettings::default(),
            100.0,
        )
        .unwrap();
        assert_eq!(u.evaluate(30.0, 2.0).unwrap(), f.evaluate(30.0, 2.0).unwrap());
    }

    #[test]
    fn diagonal_blocks_decouple() {
        let s = scenario(&ScenarioSpec::new("diag_dichotomy")).unwrap();
        let b = PerturbationFamily::from_fn(2, 0.1, 0.0, |t| {
            Mat::from_diagonal(&Vector::from_vec(vec![0.1 / t, -0.05 / t]))
        })
        .unwrap();
        let u = perturbed_family(&s.family, &b, PerturbationRoute::Picard, &PicardSettings::default(), 100.0).unwrap();
        let m = u.evaluate(40.0, 2.0).unwrap();
        assert_abs_diff_eq!(m[(0, 0)], 20f64.powf(-0.9), epsilon = 1e-9);
        assert_abs_diff_eq!(m[(1, 1)], 20f64.powf(0.95), epsilon = 1e-8);
        assert_abs_diff_eq!(m[(0, 1)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn jump_families_are_rejected() {
        let s = scenario(&ScenarioSpec::new("counterexample")).unwrap();
        let b = PerturbationFamily::scaled_identity(1, 0.1, 0.0).unwrap();
        assert!(perturbed_family(&s.family, &b, PerturbationRoute::Picard, &PicardSettings::default(), 100.0).is_err());
    }

    #[test]
    fn operator_d_oracles() {
        let grid = crate::grid::TimeGrid::new(100.0, 64).unwrap();
        let n = constant_norm(1);
        let b = PerturbationFamily::scaled_identity(1, 0.2, 0.0).unwrap();
        let one = GridFunction::from_fn(&grid, |_| Vector::from_element(1, 1.0)).unwrap();
        let r = check_operator_d_estimate(&b, &n, &[one]).unwrap();
        assert_abs_diff_eq!(r.max_ratio, 0.2, epsilon = 1e-12);
        assert!(r.pass);
        let decay = GridFunction::from_fn(&grid, |t| Vector::from_element(1, 1.0 / t)).unwrap();
        let r = check_operator_d_estimate(&b, &n, &[decay, GridFunction::zeros(&grid, 1)]).unwrap();
        assert!(r.max_ratio < 0.2);
    }

    #[test]
    fn gronwall_for_perturbed_contraction() {
        let b = PerturbationFamily::scaled_identity(1, 0.1, 0.0).unwrap();
        let u = perturbed_family(&contraction(true), &b, PerturbationRoute::Auto, &PicardSettings::default(), 1000.0)
            .unwrap();
        let samples = SamplePairs::new(&SampleConfig::default(), 1, &[]);
        let r = gronwall_growth_check(&u, &constant_norm(1), 1.0, 0.0, 0.1, 1.0, &samples, 1e-6).unwrap();
        assert!(r.pass, "{r:?}");
        assert_abs_diff_eq!(r.exponent, 0.1, epsilon = 1e-15);
    }
}
