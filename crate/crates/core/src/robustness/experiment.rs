use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    check_perturbation_bound, gronwall_growth_check, perturbed_family, GronwallReport, PerturbationBoundReport,
    PerturbationFamily, PerturbationRoute, PicardSettings, INTEGRAL_RESIDUAL_KEY,
};
use crate::dichotomy::{
    computed_projections, fit_bounded_growth, fit_dichotomy, projection_norm_bound, BoundedGrowth,
    DichotomyCertificate, ProjectionFamily, SplitConfig,
};
use crate::error::{Error, Result};
use crate::evolution::EvolutionFamily;
use crate::grid::{log_spaced, SampleConfig, SamplePairs};
use crate::norms::NormFamily;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessConfig {
    pub samples: SampleConfig,
    pub route: PerturbationRoute,
    pub picard: PicardSettings,
    pub split: SplitConfig,
    /// slack on `||P|| <= 2 / gamma`
    pub projection_tol: f64,
    pub gronwall_tol: f64,
    /// sweep entries with `c` above this are expected to break down and do
    /// not count against the overall verdict
    pub threshold: Option<f64>,
}

impl RobustnessConfig {
    pub fn new(t_max: f64, seed: u64) -> Self {
        RobustnessConfig {
            samples: SampleConfig { seed, ..SampleConfig::with_t_max(t_max) },
            route: PerturbationRoute::Auto,
            picard: PicardSettings::default(),
            split: SplitConfig::with_t_max(t_max),
            projection_tol: 1e-6,
            gronwall_tol: 1e-6,
            threshold: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub c: f64,
    pub lambda_stable: Option<f64>,
    pub lambda_unstable: Option<f64>,
    pub d: f64,
    pub pass: bool,
    pub integral_residual: f64,
    pub perturbation_bound: PerturbationBoundReport,
    pub gronwall: GronwallReport,
    pub certificate: DichotomyCertificate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessTable {
    pub family: String,
    pub perturbation: String,
    /// bounded-growth constants of the unperturbed family
    pub unperturbed_growth: BoundedGrowth,
    /// equivalence constant `C` used in the estimates
    pub norm_constant: f64,
    pub rows: Vec<RobustnessRow>,
    /// smallest swept `c` whose certificate fails
    pub breakdown: Option<f64>,
    pub threshold: Option<f64>,
    /// every entry with `c` at or below the threshold passes
    pub pass: bool,
}

/// Rescales `b` to every `c` of the sweep, builds the perturbed family and
/// re-certifies it with the unperturbed stable rank.
pub fn robustness_experiment(
    family: &EvolutionFamily,
    proj: &ProjectionFamily,
    norms: &NormFamily,
    b: &PerturbationFamily,
    c_grid: &[f64],
    config: &RobustnessConfig,
) -> Result<RobustnessTable> {
    if c_grid.is_empty() {
        return Err(Error::invalid("the c sweep is empty"));
    }
    if let Some(c) = c_grid.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
        return Err(Error::invalid(format!("sweep values must be finite and non-negative, got {c}")));
    }
    let t_max = config.samples.t_max;
    let samples = SamplePairs::new(&config.samples, family.dim(), &family.breakpoints(t_max));
    let mut growth = fit_bounded_growth(family, norms, &samples)?;
    growth.residuals.clear();
    let big_c = norms.constants().map_or(1.0, |k| k.c);
    let rank = proj.rank();
    let d = family.dim();
    let check_times = log_spaced(1.0, t_max, 200);
    let proj_taus = log_spaced(1.0, t_max, 16);

    let mut rows: Vec<RobustnessRow> = c_grid
        .par_iter()
        .map(|&c| {
            let bc = b.with_c(c)?;
            let u = perturbed_family(family, &bc, config.route, &config.picard, t_max)?;
            let p = if bc.is_zero() {
                proj.clone()
            } else if rank == 0 {
                ProjectionFamily::zero(d)
            } else if rank == d {
                ProjectionFamily::identity(d)
            } else {
                let split = SplitConfig { forced_rank: Some(rank), ..config.split };
                computed_projections(&u, norms, &split)?
            };
            let mut cert = fit_dichotomy(&u, norms, &p, &samples)?;
            let mut bg = fit_bounded_growth(&u, norms, &samples)?;
            bg.residuals.clear();
            cert.bounded_growth = Some(bg);
            cert.projection =
                Some(projection_norm_bound(&p, norms, &proj_taus, 32, config.samples.seed, config.projection_tol)?);
            cert.seed = Some(config.samples.seed);
            cert.finalize();
            let gronwall =
                gronwall_growth_check(&u, norms, growth.m, growth.a, c, big_c, &samples, config.gronwall_tol)?;
            Ok(RobustnessRow {
                c,
                lambda_stable: cert.lambda_stable,
                lambda_unstable: cert.lambda_unstable,
                d: cert.d,
                pass: cert.verdict.pass,
                integral_residual: u.metadata().get(INTEGRAL_RESIDUAL_KEY).copied().unwrap_or(f64::NAN),
                perturbation_bound: check_perturbation_bound(&bc, &check_times),
                gronwall,
                certificate: cert,
            })
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.c.total_cmp(&b.c));
    let breakdown = rows.iter().find(|r| !r.pass).map(|r| r.c);
    let pass = rows.iter().filter(|r| config.threshold.is_none_or(|th| r.c <= th)).all(|r| r.pass);
    Ok(RobustnessTable {
        family: family.label().to_string(),
        perturbation: b.label().to_string(),
        unperturbed_growth: growth,
        norm_constant: big_c,
        rows,
        breakdown,
        threshold: config.threshold,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{scenario, ScenarioSpec};
    use crate::norms::constant_norm;

    #[test]
    fn scalar_sweep_shifts_exponent() {
        let s = scenario(&ScenarioSpec::new("scalar_contraction")).unwrap();
        let b = PerturbationFamily::scaled_identity(1, 1.0, 0.0).unwrap();
        let cfg = RobustnessConfig::new(1000.0, 0);
        let table = robustness_experiment(
            &s.family,
            s.projection.as_ref().unwrap(),
            &constant_norm(1),
            &b,
            &[0.0, 0.05, 2.0],
            &cfg,
        )
        .unwrap();
        assert!((table.rows[0].lambda_stable.unwrap() - 1.0).abs() < 1e-9);
        assert!((table.rows[1].lambda_stable.unwrap() - 0.95).abs() < 0.02);
        assert!(table.rows[1].gronwall.pass);
        assert!(!table.rows[2].pass);
        assert_eq!(table.breakdown, Some(2.0));
        assert!(!table.pass);
    }

    #[test]
    fn empty_sweep_is_rejected() {
        let s = scenario(&ScenarioSpec::new("scalar_contraction")).unwrap();
        let b = PerturbationFamily::scaled_identity(1, 1.0, 0.0).unwrap();
        let r = robustness_experiment(
            &s.family,
            s.projection.as_ref().unwrap(),
            &constant_norm(1),
            &b,
            &[],
            &RobustnessConfig::new(100.0, 0),
        );
        assert!(r.is_err());
    }
}
