//! Families of norms `||.||_t` on `R^d`.
//!
//! Besides the constant Euclidean family the module builds the two Lyapunov
//! constructions: the two-term norm that turns a nonuniform dichotomy into a
//! dichotomy with constant one, and the strong three-term variant that also
//! controls forward growth on the unstable directions.

mod lyapunov;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dichotomy::ProjectionFamily;
use crate::error::{Error, Result};
use crate::evolution::EvolutionFamily;
use crate::fit::upper_envelope;
use crate::grid::log_spaced;
use crate::linalg::{random_unit_vectors, Vector};

use lyapunov::{LyapunovAt, LyapunovData, LyapunovParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormKind {
    Constant,
    Lyapunov,
    StrongLyapunov,
    Custom,
}

/// Equivalence constants: `||x|| <= ||x||_t <= C t^eps ||x||`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormConstants {
    pub c: f64,
    pub epsilon: f64,
}

/// Serializable description of a constructed norm family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormDescriptor {
    pub kind: NormKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
}

/// Construction parameters of the Lyapunov norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovConfig {
    pub lambda: f64,
    /// supremum horizon, conventionally ten times the working `t_max`
    pub horizon: f64,
    /// log-grid points per decade
    pub density: usize,
    /// golden-section iterations spent on interior maxima
    pub refine: usize,
}

impl LyapunovConfig {
    pub fn new(lambda: f64, t_max: f64) -> Self {
        LyapunovConfig { lambda, horizon: 10.0 * t_max, density: 64, refine: 24 }
    }
}

pub type CustomNorm = Arc<dyn Fn(f64, &Vector) -> Result<f64> + Send + Sync>;

#[derive(Clone)]
enum Inner {
    Constant,
    Lyapunov(Arc<LyapunovData>),
    Custom(CustomNorm),
}

/// Norm family handle. Cheap to clone; Lyapunov families cache their per-time
/// state.
#[derive(Clone)]
pub struct NormFamily {
    dim: usize,
    kind: NormKind,
    constants: Option<NormConstants>,
    inner: Inner,
    cache: Arc<Mutex<HashMap<u64, Arc<LocalNorm>>>>,
}

impl std::fmt::Debug for NormFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NormFamily")
            .field("dim", &self.dim)
            .field("kind", &self.kind)
            .field("constants", &self.constants)
            .finish_non_exhaustive()
    }
}

const CACHE_LIMIT: usize = 8192;

/// A norm frozen at one time `t`.
pub struct LocalNorm {
    t: f64,
    inner: LocalInner,
}

enum LocalInner {
    Euclidean,
    Lyapunov(Box<LyapunovAt>),
    Custom(CustomNorm),
}

impl LocalNorm {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn norm(&self, x: &Vector) -> Result<f64> {
        match &self.inner {
            LocalInner::Euclidean => Ok(x.norm()),
            LocalInner::Lyapunov(l) => l.norm(x),
            LocalInner::Custom(f) => f(self.t, x),
        }
    }

    /// Individual suprema `(stable, unstable, growth)` of a Lyapunov norm;
    /// `(||x||, 0, 0)` for other kinds.
    pub fn terms(&self, x: &Vector) -> Result<(f64, f64, f64)> {
        match &self.inner {
            LocalInner::Lyapunov(l) => {
                debug_assert_eq!(l.tau(), self.t);
                l.terms(x)
            }
            _ => Ok((self.norm(x)?, 0.0, 0.0)),
        }
    }
}

impl NormFamily {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> NormKind {
        self.kind
    }

    pub fn constants(&self) -> Option<NormConstants> {
        self.constants
    }

    pub fn with_constants(mut self, c: f64, epsilon: f64) -> Self {
        self.constants = Some(NormConstants { c, epsilon });
        self
    }

    pub fn descriptor(&self) -> Option<NormDescriptor> {
        match &self.inner {
            Inner::Constant => {
                Some(NormDescriptor { kind: NormKind::Constant, lambda: None, b: None, horizon: None, grid: None })
            }
            Inner::Lyapunov(data) => Some(NormDescriptor {
                kind: self.kind,
                lambda: Some(data.params.lambda),
                b: data.params.b,
                horizon: Some(data.params.horizon),
                grid: Some(data.params.density),
            }),
            Inner::Custom(_) => None,
        }
    }

    /// State of the norm at time `t` (cached).
    pub fn at(&self, t: f64) -> Result<Arc<LocalNorm>> {
        if !(t >= 1.0) {
            return Err(Error::Domain { t, tau: t });
        }
        let inner = match &self.inner {
            Inner::Constant => return Ok(Arc::new(LocalNorm { t, inner: LocalInner::Euclidean })),
            Inner::Custom(f) => return Ok(Arc::new(LocalNorm { t, inner: LocalInner::Custom(Arc::clone(f)) })),
            Inner::Lyapunov(data) => data,
        };
        let key = t.to_bits();
        if let Some(hit) = self.cache.lock().expect("norm cache poisoned").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let local = Arc::new(LocalNorm { t, inner: LocalInner::Lyapunov(Box::new(inner.at(t)?)) });
        let mut cache = self.cache.lock().expect("norm cache poisoned");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, Arc::clone(&local));
        Ok(local)
    }

    /// `||x||_t`.
    pub fn norm(&self, t: f64, x: &Vector) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        self.at(t)?.norm(x)
    }

    fn new(dim: usize, kind: NormKind, constants: Option<NormConstants>, inner: Inner) -> Self {
        NormFamily { dim, kind, constants, inner, cache: Arc::new(Mutex::new(HashMap::new())) }
    }
}

/// Euclidean norm at every time, constants `(1, 0)`.
pub fn constant_norm(dim: usize) -> NormFamily {
    NormFamily::new(dim, NormKind::Constant, Some(NormConstants { c: 1.0, epsilon: 0.0 }), Inner::Constant)
}

/// User-supplied norm family (not serializable).
pub fn custom_norm(dim: usize, constants: Option<NormConstants>, f: CustomNorm) -> NormFamily {
    NormFamily::new(dim, NormKind::Custom, constants, Inner::Custom(f))
}

/// Two-term Lyapunov norm
/// `||x||_tau = sup_{t >= tau} ||T(t,tau)P(tau)x|| (t/tau)^lambda
///            + sup_{t <= tau} ||T(t,tau)Q(tau)x|| (tau/t)^lambda`,
/// with the backward maps taken on `Ker P`.
pub fn lyapunov_norm(family: &EvolutionFamily, proj: &ProjectionFamily, config: &LyapunovConfig) -> Result<NormFamily> {
    build(family, proj, config, None)
}

/// Three-term variant adding `sup_{t >= tau} ||T(t,tau)Q(tau)x|| (t/tau)^-b`.
pub fn strong_lyapunov_norm(
    family: &EvolutionFamily,
    proj: &ProjectionFamily,
    config: &LyapunovConfig,
    b: f64,
) -> Result<NormFamily> {
    if !(b > 0.0) {
        return Err(Error::invalid(format!("growth exponent b must be positive, got {b}")));
    }
    build(family, proj, config, Some(b))
}

fn build(
    family: &EvolutionFamily,
    proj: &ProjectionFamily,
    config: &LyapunovConfig,
    b: Option<f64>,
) -> Result<NormFamily> {
    let params = LyapunovParams {
        lambda: config.lambda,
        b,
        horizon: config.horizon,
        density: config.density,
        refine: config.refine,
    };
    let data = LyapunovData::new(family.clone(), proj.clone(), params)?;
    let kind = if b.is_some() { NormKind::StrongLyapunov } else { NormKind::Lyapunov };
    Ok(NormFamily::new(family.dim(), kind, None, Inner::Lyapunov(Arc::new(data))))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub fitted_c: f64,
    pub fitted_epsilon: f64,
    /// `max(0, ||x|| - ||x||_t)` over samples
    pub max_violation: f64,
    /// `| ||a x||_t - |a| ||x||_t |` relative to `|a| ||x||_t`
    pub homogeneity_defect: f64,
    /// positive part of `||x + y||_t - ||x||_t - ||y||_t`, relative
    pub triangle_defect: f64,
    pub samples: usize,
    pub times: usize,
}

/// Fits `log ||x||_t <= log C + eps log t` over random unit vectors and
/// log-spaced `t` in `[1, t_max]`, and spot-checks the norm axioms.
pub fn check_norm_equivalence(norms: &NormFamily, samples: usize, t_max: f64, seed: u64) -> Result<EquivalenceReport> {
    if samples == 0 {
        return Err(Error::invalid("norm equivalence needs at least one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs = random_unit_vectors(norms.dim(), samples, &mut rng);
    let ys = random_unit_vectors(norms.dim(), samples, &mut rng);
    let times = log_spaced(1.0, t_max, (16.0 * t_max.log10()).ceil().max(2.0) as usize);
    // per time: (log t, log norm) points and the three axiom defects
    type Row = (Vec<(f64, f64)>, f64, f64, f64);
    let rows: Vec<Row> = times
        .par_iter()
        .map(|&t| {
            let local = norms.at(t)?;
            let mut pts = Vec::with_capacity(samples);
            let (mut viol, mut hom, mut tri) = (0.0f64, 0.0f64, 0.0f64);
            for (x, y) in xs.iter().zip(&ys) {
                let nx = local.norm(x)?;
                let ny = local.norm(y)?;
                pts.push((t.ln(), nx.ln()));
                viol = viol.max(1.0 - nx);
                let scaled = local.norm(&(x * -2.5))?;
                hom = hom.max((scaled - 2.5 * nx).abs() / (2.5 * nx).max(f64::MIN_POSITIVE));
                let sum = local.norm(&(x + y))?;
                tri = tri.max((sum - nx - ny) / (nx + ny).max(f64::MIN_POSITIVE));
            }
            Ok((pts, viol, hom, tri))
        })
        .collect::<Result<_>>()?;
    let mut points = Vec::with_capacity(samples * times.len());
    let (mut viol, mut hom, mut tri) = (0.0f64, 0.0f64, 0.0f64);
    for (pts, v, h, t) in rows {
        points.extend(pts);
        viol = viol.max(v);
        hom = hom.max(h);
        tri = tri.max(t);
    }
    let fit = upper_envelope(&points, 0.0).expect("points are non-empty");
    Ok(EquivalenceReport {
        fitted_c: fit.intercept.exp(),
        fitted_epsilon: fit.slope,
        max_violation: viol.max(0.0),
        homogeneity_defect: hom,
        triangle_defect: tri.max(0.0),
        samples,
        times: times.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{scenario, ScenarioSpec};
    use approx::assert_abs_diff_eq;

    fn diag() -> (EvolutionFamily, ProjectionFamily) {
        let s = scenario(&ScenarioSpec::new("diag_dichotomy")).unwrap();
        (s.family, s.projection.unwrap())
    }

    #[test]
    fn constant_norm_is_euclidean() {
        let n = constant_norm(2);
        assert_eq!(n.norm(100.0, &Vector::from_vec(vec![3.0, 4.0])).unwrap(), 5.0);
        assert_eq!(n.norm(1.0, &Vector::zeros(2)).unwrap(), 0.0);
        let rep = check_norm_equivalence(&n, 4, 100.0, 1).unwrap();
        assert_abs_diff_eq!(rep.fitted_c, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.fitted_epsilon, 0.0, epsilon = 1e-12);
        assert!(rep.max_violation < 1e-12);
    }

    #[test]
    fn lyapunov_norm_of_contraction_is_absolute_value() {
        let s = scenario(&ScenarioSpec::new("scalar_contraction")).unwrap();
        let n = lyapunov_norm(&s.family, &s.projection.unwrap(), &LyapunovConfig::new(1.0, 100.0)).unwrap();
        for &t in &[1.0, 3.3, 70.0] {
            assert_abs_diff_eq!(n.norm(t, &Vector::from_element(1, -2.0)).unwrap(), 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn lyapunov_norm_of_diagonal_dichotomy() {
        let (f, p) = diag();
        let n = lyapunov_norm(&f, &p, &LyapunovConfig::new(1.0, 100.0)).unwrap();
        assert_abs_diff_eq!(n.norm(5.0, &Vector::from_vec(vec![1.0, 0.0])).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(n.norm(5.0, &Vector::from_vec(vec![0.0, 1.0])).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(n.norm(5.0, &Vector::from_vec(vec![1.0, 1.0])).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn strong_norm_adds_growth_term() {
        let (f, p) = diag();
        let n = strong_lyapunov_norm(&f, &p, &LyapunovConfig::new(1.0, 100.0), 1.0).unwrap();
        let local = n.at(5.0).unwrap();
        let (s, u, g) = local.terms(&Vector::from_vec(vec![0.0, 1.0])).unwrap();
        assert_eq!(s, 0.0);
        assert_abs_diff_eq!(u, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn too_large_exponent_is_detected() {
        let s = scenario(&ScenarioSpec::new("scalar_contraction")).unwrap();
        let n = lyapunov_norm(&s.family, &s.projection.unwrap(), &LyapunovConfig::new(1.5, 100.0)).unwrap();
        assert!(matches!(n.norm(2.0, &Vector::from_element(1, 1.0)), Err(Error::UnboundedSupremum { .. })));
    }

    #[test]
    fn descriptor_round_trips() {
        let (f, p) = diag();
        let n = strong_lyapunov_norm(&f, &p, &LyapunovConfig::new(1.0, 100.0), 2.0).unwrap();
        let d = n.descriptor().unwrap();
        let text = serde_json::to_string(&d).unwrap();
        let back: NormDescriptor = serde_json::from_str(&text).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.kind, NormKind::StrongLyapunov);
    }
}
