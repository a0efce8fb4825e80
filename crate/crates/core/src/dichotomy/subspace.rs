use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ProjectionFamily, ProjectionKind};
use crate::error::{Error, Result};
use crate::evolution::EvolutionFamily;
use crate::fit::least_squares;
use crate::grid::log_spaced;
use crate::linalg::{condition_number, orth, right_singular_vectors_ascending, Mat, Vector, RANK_TOL};
use crate::norms::NormFamily;

/// Parameters of the growth-based stable/unstable classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    /// orbit horizon; at least `1e4 tau` is always used
    pub horizon: f64,
    /// directions with exponent below `-threshold` are stable
    pub threshold: f64,
    /// exponents within `margin` of `-threshold` are ambiguous
    pub margin: f64,
    /// orbit samples per direction
    pub samples: usize,
    /// skip the classification and keep this many decaying directions
    pub forced_rank: Option<usize>,
    /// condition-number cap on the combined basis `[S U]`
    pub cond_cap: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { horizon: 1e4, threshold: 0.0, margin: 0.05, samples: 48, forced_rank: None, cond_cap: 1e8 }
    }
}

impl SplitConfig {
    pub fn with_t_max(t_max: f64) -> Self {
        SplitConfig { horizon: 10.0 * t_max, ..Default::default() }
    }

    fn horizon_for(&self, tau: f64) -> f64 {
        self.horizon.max(1e4 * tau)
    }
}

/// Fitted growth exponent of `t -> ||T(t, tau) v||_t` against `log(t/tau)`;
/// `-inf` when the orbit reaches zero.
pub fn orbit_exponent(
    family: &EvolutionFamily,
    norms: &NormFamily,
    v: &Vector,
    tau: f64,
    horizon: f64,
    samples: usize,
) -> Result<f64> {
    let times = log_spaced(tau, horizon, samples.max(2));
    let mut pts = Vec::with_capacity(times.len());
    for &t in &times {
        let w = family.apply(t, tau, v)?;
        let n = norms.norm(t, &w)?;
        if n == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        pts.push(((t / tau).ln(), n.ln()));
    }
    Ok(least_squares(&pts).map_or(0.0, |f| f.slope))
}

/// Classified right singular directions of `T(horizon, tau)`, ascending by
/// singular value, with their fitted exponents.
pub fn direction_exponents(
    family: &EvolutionFamily,
    norms: &NormFamily,
    tau: f64,
    config: &SplitConfig,
) -> Result<Vec<(f64, Vector)>> {
    let horizon = config.horizon_for(tau);
    let m = family.evaluate(horizon, tau)?;
    right_singular_vectors_ascending(&m)
        .into_par_iter()
        .map(|(_, v)| Ok((orbit_exponent(family, norms, &v, tau, horizon, config.samples)?, v)))
        .collect()
}

fn columns(vs: &[Vector], d: usize) -> Mat {
    let mut m = Mat::zeros(d, vs.len());
    for (j, v) in vs.iter().enumerate() {
        m.set_column(j, v);
    }
    m
}

/// Orthonormal basis of the directions whose orbits decay, read off from the
/// right singular vectors of `T(horizon, tau)`.
pub fn stable_subspace(family: &EvolutionFamily, norms: &NormFamily, tau: f64, config: &SplitConfig) -> Result<Mat> {
    let d = family.dim();
    if let Some(r) = config.forced_rank {
        if r > d {
            return Err(Error::invalid(format!("forced rank {r} exceeds dimension {d}")));
        }
        let m = family.evaluate(config.horizon_for(tau), tau)?;
        let dirs: Vec<Vector> = right_singular_vectors_ascending(&m).into_iter().take(r).map(|p| p.1).collect();
        return Ok(columns(&dirs, d));
    }
    let dirs = direction_exponents(family, norms, tau, config)?;
    let mut stable = Vec::new();
    for (exponent, v) in dirs {
        if (exponent + config.threshold).abs() <= config.margin {
            return Err(Error::AmbiguousSplit { tau, exponent });
        }
        if exponent < -config.threshold {
            stable.push(v);
        }
    }
    Ok(orth(&columns(&stable, d), RANK_TOL))
}

/// Orthonormalized `T(tau, 1) Z`.
pub fn unstable_subspace_from_z(family: &EvolutionFamily, z: &Mat, tau: f64) -> Result<Mat> {
    let d = family.dim();
    if z.ncols() == 0 {
        return Ok(Mat::zeros(d, 0));
    }
    let image = family.evaluate(tau, 1.0)? * z;
    let sv = image.singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if smax == 0.0 || smin / smax <= RANK_TOL {
        return Err(Error::RankCollapse { tau });
    }
    Ok(orth(&image, RANK_TOL))
}

/// Projection onto `span(S)` along `span(U)`.
pub fn projection_from_bases(s: &Mat, u: &Mat, tau: f64, cond_cap: f64) -> Result<Mat> {
    let d = s.nrows();
    let r = s.ncols();
    if r + u.ncols() != d {
        return Err(Error::NonComplementary { tau, cond: f64::INFINITY });
    }
    let mut b = Mat::zeros(d, d);
    b.columns_mut(0, r).copy_from(s);
    b.columns_mut(r, d - r).copy_from(u);
    let cond = condition_number(&b);
    if !(cond <= cond_cap) {
        return Err(Error::NonComplementary { tau, cond });
    }
    let inv = b.clone().try_inverse().ok_or(Error::NonComplementary { tau, cond })?;
    let mut e = Mat::zeros(d, d);
    for i in 0..r {
        e[(i, i)] = 1.0;
    }
    Ok(b * e * inv)
}

/// Projection family from per-time bases `(tau, S(tau), U(tau))`, piecewise
/// constant between the supplied times.
pub fn projections_from_splitting(bases: &[(f64, Mat, Mat)], cond_cap: f64) -> Result<ProjectionFamily> {
    if bases.is_empty() {
        return Err(Error::invalid("splitting needs at least one time"));
    }
    let mut table: Vec<(f64, Mat)> = bases
        .iter()
        .map(|(tau, s, u)| Ok((*tau, projection_from_bases(s, u, *tau, cond_cap)?)))
        .collect::<Result<_>>()?;
    table.sort_by(|a, b| a.0.total_cmp(&b.0));
    let d = table[0].1.nrows();
    let rank = bases[0].1.ncols();
    let table = Arc::new(table);
    Ok(ProjectionFamily::from_fn(
        d,
        rank,
        ProjectionKind::User,
        Arc::new(move |t| {
            let k = table.partition_point(|e| e.0 <= t).saturating_sub(1);
            Ok(table[k].1.clone())
        }),
    ))
}

/// Splitting data at time one: `S(1)` and the complement `Z` used to carry
/// the unstable directions forward.
#[derive(Debug, Clone)]
pub struct Splitting {
    pub stable_at_one: Mat,
    pub z: Mat,
}

/// `S(1)` from orbit growth and `Z` its orthogonal complement.
pub fn splitting_at_one(family: &EvolutionFamily, norms: &NormFamily, config: &SplitConfig) -> Result<Splitting> {
    let s = stable_subspace(family, norms, 1.0, config)?;
    let d = family.dim();
    let r = s.ncols();
    let z = if r == 0 {
        Mat::identity(d, d)
    } else if r == d {
        Mat::zeros(d, 0)
    } else {
        let comp = Mat::identity(d, d) - &s * s.transpose();
        orth(&comp, 1e-8)
    };
    Ok(Splitting { stable_at_one: s, z })
}

/// Lazily evaluated `P(tau)` with `S(tau)` the `r` most contracted right
/// singular directions of `T(H, tau)` (`r = dim S(1)`) and
/// `U(tau) = T(tau, 1) Z`. Results are cached per time.
pub fn computed_projections(
    family: &EvolutionFamily,
    norms: &NormFamily,
    config: &SplitConfig,
) -> Result<ProjectionFamily> {
    let split = splitting_at_one(family, norms, config)?;
    Ok(projections_from_z(family, &split, config))
}

pub fn projections_from_z(family: &EvolutionFamily, split: &Splitting, config: &SplitConfig) -> ProjectionFamily {
    let d = family.dim();
    let rank = split.stable_at_one.ncols();
    let family = family.clone();
    let z = split.z.clone();
    let config = SplitConfig { forced_rank: Some(rank), ..*config };
    let cache: Mutex<HashMap<u64, Mat>> = Mutex::new(HashMap::new());
    ProjectionFamily::from_fn(
        d,
        rank,
        ProjectionKind::ComputedFromZ,
        Arc::new(move |tau| {
            if let Some(p) = cache.lock().expect("projection cache poisoned").get(&tau.to_bits()) {
                return Ok(p.clone());
            }
            let p = if rank == 0 {
                Mat::zeros(d, d)
            } else if rank == d {
                Mat::identity(d, d)
            } else {
                let m = family.evaluate(config.horizon_for(tau), tau)?;
                let dirs: Vec<Vector> =
                    right_singular_vectors_ascending(&m).into_iter().take(rank).map(|p| p.1).collect();
                let s = columns(&dirs, d);
                let u = unstable_subspace_from_z(&family, &z, tau)?;
                projection_from_bases(&s, &u, tau, config.cond_cap)?
            };
            let mut c = cache.lock().expect("projection cache poisoned");
            if c.len() > 16384 {
                c.clear();
            }
            c.insert(tau.to_bits(), p.clone());
            Ok(p)
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{scenario, ScenarioSpec};
    use crate::linalg::op_norm;
    use crate::norms::constant_norm;
    use approx::assert_abs_diff_eq;

    #[test]
    fn diagonal_split() {
        let s = scenario(&ScenarioSpec::new("diag_dichotomy")).unwrap();
        let n = constant_norm(2);
        let basis = stable_subspace(&s.family, &n, 1.0, &SplitConfig::default()).unwrap();
        assert_eq!(basis.ncols(), 1);
        assert_abs_diff_eq!(basis[(0, 0)].abs(), 1.0, epsilon = 1e-12);
        let z = Mat::from_column_slice(2, 1, &[0.0, 1.0]);
        let u = unstable_subspace_from_z(&s.family, &z, 4.0).unwrap();
        assert_abs_diff_eq!(u[(1, 0)].abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn expansion_has_no_stable_directions() {
        let s = scenario(&ScenarioSpec::new("scalar_expansion")).unwrap();
        let basis = stable_subspace(&s.family, &constant_norm(1), 1.0, &SplitConfig::default()).unwrap();
        assert_eq!(basis.ncols(), 0);
    }

    #[test]
    fn neutral_family_is_ambiguous() {
        let s = scenario(&ScenarioSpec::new("neutral")).unwrap();
        let r = stable_subspace(&s.family, &constant_norm(1), 1.0, &SplitConfig::default());
        assert!(matches!(r, Err(Error::AmbiguousSplit { .. })));
    }

    #[test]
    fn computed_projection_has_reference_range_and_is_invariant() {
        let s = scenario(&ScenarioSpec::new("oblique_dichotomy")).unwrap();
        let p = computed_projections(&s.family, &constant_norm(2), &SplitConfig::with_t_max(1000.0)).unwrap();
        let reference = s.projection.unwrap();
        for &tau in &[1.0, 7.0, 300.0] {
            let (pc, pr) = (p.at(tau).unwrap(), reference.at(tau).unwrap());
            assert!(op_norm(&(&pc * &pr - &pr)) < 1e-6, "tau {tau}");
            assert!(op_norm(&(&pr * &pc - &pc)) < 1e-6, "tau {tau}");
            let t = 3.0 * tau;
            let m = s.family.evaluate(t, tau).unwrap();
            let defect = op_norm(&(p.at(t).unwrap() * &m - &m * &pc));
            assert!(defect < 1e-6, "tau {tau}: {defect}");
        }
    }

    #[test]
    fn diagonal_splitting_reproduces_reference() {
        let s = scenario(&ScenarioSpec::new("diag_dichotomy")).unwrap();
        let n = constant_norm(2);
        let cfg = SplitConfig::with_t_max(1000.0);
        let split = splitting_at_one(&s.family, &n, &cfg).unwrap();
        let bases: Vec<(f64, Mat, Mat)> = [1.0, 10.0, 100.0]
            .iter()
            .map(|&tau| {
                let st = stable_subspace(&s.family, &n, tau, &cfg).unwrap();
                let u = unstable_subspace_from_z(&s.family, &split.z, tau).unwrap();
                (tau, st, u)
            })
            .collect();
        let p = projections_from_splitting(&bases, 1e8).unwrap();
        let reference = s.projection.unwrap();
        for &tau in &[1.0, 10.0, 100.0, 500.0] {
            let diff = op_norm(&(p.at(tau).unwrap() - reference.at(tau).unwrap()));
            assert!(diff < 1e-6, "tau {tau}: {diff}");
        }
    }

    #[test]
    fn non_complementary_bases() {
        let s = Mat::from_column_slice(2, 1, &[1.0, 0.0]);
        let u = Mat::from_column_slice(2, 1, &[1.0, 1e-12]);
        assert!(matches!(projection_from_bases(&s, &u, 1.0, 1e8), Err(Error::NonComplementary { .. })));
    }

    #[test]
    fn rank_collapse_on_zero_maps() {
        let s = scenario(&ScenarioSpec::new("counterexample")).unwrap();
        let z = Mat::from_element(1, 1, 1.0);
        assert!(matches!(unstable_subspace_from_z(&s.family, &z, 5.0), Err(Error::RankCollapse { .. })));
    }
}
