use serde::{Deserialize, Serialize};

use super::{
    computed_projections, fit_bounded_growth, fit_dichotomy, projection_norm_bound, DichotomyCertificate,
    ProjectionFamily, SplitConfig,
};
use crate::error::Result;
use crate::evolution::EvolutionFamily;
use crate::grid::{log_spaced, SampleConfig, SamplePairs};
use crate::norms::NormFamily;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyConfig {
    pub samples: SampleConfig,
    pub split: SplitConfig,
    /// sampled times for the projection bound
    pub projection_times: usize,
    /// random unit pairs per time for the angle estimate
    pub projection_samples: usize,
    pub tol: f64,
}

impl CertifyConfig {
    pub fn new(t_max: f64, seed: u64) -> Self {
        CertifyConfig {
            samples: SampleConfig { seed, ..SampleConfig::with_t_max(t_max) },
            split: SplitConfig::with_t_max(t_max),
            projection_times: 16,
            projection_samples: 32,
            tol: 1e-6,
        }
    }

    pub fn sample_pairs(&self, family: &EvolutionFamily) -> SamplePairs {
        SamplePairs::new(&self.samples, family.dim(), &family.breakpoints(self.samples.t_max))
    }
}

/// Splitting (computed from orbit growth unless `proj` is given), envelope
/// fits, bounded growth and the projection bound in one certificate.
pub fn certify(
    family: &EvolutionFamily,
    proj: Option<&ProjectionFamily>,
    norms: &NormFamily,
    config: &CertifyConfig,
) -> Result<(DichotomyCertificate, ProjectionFamily)> {
    let proj = match proj {
        Some(p) => p.clone(),
        None => computed_projections(family, norms, &config.split)?,
    };
    let samples = config.sample_pairs(family);
    let mut cert = fit_dichotomy(family, norms, &proj, &samples)?;
    cert.bounded_growth = Some(fit_bounded_growth(family, norms, &samples)?);
    let taus = log_spaced(1.0, config.samples.t_max, config.projection_times.max(1));
    cert.projection =
        Some(projection_norm_bound(&proj, norms, &taus, config.projection_samples, config.samples.seed, config.tol)?);
    cert.seed = Some(config.samples.seed);
    cert.finalize();
    Ok((cert, proj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{scenario, ScenarioSpec};
    use crate::norms::constant_norm;

    #[test]
    fn diagonal_dichotomy_certifies_with_computed_splitting() {
        let s = scenario(&ScenarioSpec::new("diag_dichotomy")).unwrap();
        let (cert, p) = certify(&s.family, None, &constant_norm(2), &CertifyConfig::new(1000.0, 0)).unwrap();
        assert!(cert.verdict.pass, "{:?}", cert.verdict);
        assert_eq!(p.rank(), 1);
        assert!((cert.lambda().unwrap() - 1.0).abs() < 0.05);
    }

    #[test]
    fn counterexample_fails() {
        let s = scenario(&ScenarioSpec::new("counterexample")).unwrap();
        let (cert, _) =
            certify(&s.family, s.projection.as_ref(), &constant_norm(1), &CertifyConfig::new(1000.0, 0)).unwrap();
        assert!(!cert.verdict.pass);
        assert!(!cert.bounded_growth.as_ref().unwrap().pass);
    }
}
