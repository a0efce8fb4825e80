//! Evolution families `T(t, tau)` on `1 <= tau <= t`.
//!
//! A family is an immutable, cheaply clonable handle around a [`Propagator`].
//! Four constructions are provided: closed-form evaluators, generator-defined
//! families solving `X' = A(t) X`, discrete products of matrices indexed by
//! `floor(t)`, and perturbed families built by the `robustness` module.

mod integrator;
pub mod scenario;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::log_spaced;
use crate::linalg::{op_norm, Mat, Vector};

pub use integrator::{integrate, IntegratorSettings};
pub use scenario::{scenario, scenario_names, Scenario, ScenarioSpec};

/// Time-dependent matrix `t -> A(t)`.
pub type MatFn = Arc<dyn Fn(f64) -> Mat + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    ClosedForm,
    Generator,
    DiscreteProduct,
    Perturbed,
}

impl std::fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FamilyKind::ClosedForm => "closed-form",
            FamilyKind::Generator => "generator",
            FamilyKind::DiscreteProduct => "discrete-product",
            FamilyKind::Perturbed => "perturbed",
        };
        f.write_str(s)
    }
}

/// Raw evaluator behind a family. Called only with `1 <= tau <= t`.
pub trait Propagator: Send + Sync {
    fn propagate(&self, t: f64, tau: f64) -> Result<Mat>;
}

struct ClosedForm<F>(F);

impl<F> Propagator for ClosedForm<F>
where
    F: Fn(f64, f64) -> Mat + Send + Sync,
{
    fn propagate(&self, t: f64, tau: f64) -> Result<Mat> {
        Ok((self.0)(t, tau))
    }
}

struct Scaled {
    inner: Arc<dyn Propagator>,
    factor: f64,
}

impl Propagator for Scaled {
    fn propagate(&self, t: f64, tau: f64) -> Result<Mat> {
        Ok(self.inner.propagate(t, tau)? * self.factor)
    }
}

struct DiscreteProduct<F> {
    factor: F,
    dim: usize,
}

impl<F> Propagator for DiscreteProduct<F>
where
    F: Fn(u64) -> Mat + Send + Sync,
{
    fn propagate(&self, t: f64, tau: f64) -> Result<Mat> {
        let (lo, hi) = (tau.floor() as u64, t.floor() as u64);
        let mut m = Mat::identity(self.dim, self.dim);
        for n in lo..hi {
            m = (self.factor)(n) * m;
            if m.iter().all(|&v| v == 0.0) {
                break;
            }
        }
        Ok(m)
    }
}

/// Solves the matrix equation with cached segment maps between the dyadic
/// checkpoints `2^k`, so one evaluation integrates at most two partial octaves.
struct GeneratorPropagator {
    a: MatFn,
    dim: usize,
    settings: IntegratorSettings,
    segments: Mutex<HashMap<i32, Arc<Mat>>>,
}

impl GeneratorPropagator {
    fn solve(&self, from: f64, to: f64) -> Result<Mat> {
        integrate(&*self.a, from, to, Mat::identity(self.dim, self.dim), &self.settings)
    }

    fn segment(&self, k: i32) -> Result<Arc<Mat>> {
        if let Some(m) = self.segments.lock().expect("segment cache poisoned").get(&k) {
            return Ok(Arc::clone(m));
        }
        let m = Arc::new(self.solve(checkpoint(k), checkpoint(k + 1))?);
        self.segments.lock().expect("segment cache poisoned").entry(k).or_insert_with(|| Arc::clone(&m));
        Ok(m)
    }
}

fn checkpoint(k: i32) -> f64 {
    2f64.powi(k)
}

/// Smallest `k >= 0` with `2^k >= t`.
fn checkpoint_at_or_after(t: f64) -> i32 {
    let mut k = t.log2().ceil().max(0.0) as i32;
    while checkpoint(k) < t {
        k += 1;
    }
    while k > 0 && checkpoint(k - 1) >= t {
        k -= 1;
    }
    k
}

/// Largest `k >= 0` with `2^k <= t`.
fn checkpoint_at_or_before(t: f64) -> i32 {
    let mut k = t.log2().floor().max(0.0) as i32;
    while checkpoint(k) > t {
        k -= 1;
    }
    while checkpoint(k + 1) <= t {
        k += 1;
    }
    k
}

impl Propagator for GeneratorPropagator {
    fn propagate(&self, t: f64, tau: f64) -> Result<Mat> {
        let i = checkpoint_at_or_after(tau);
        let j = checkpoint_at_or_before(t);
        if i > j {
            return self.solve(tau, t);
        }
        let mut m = self.solve(tau, checkpoint(i))?;
        for k in i..j {
            m = &*self.segment(k)? * m;
        }
        Ok(self.solve(checkpoint(j), t)? * m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Jumps {
    None,
    Integers,
}

/// Two-parameter family of `d x d` matrices with `T(t, t) = Id` and the
/// cocycle law.
#[derive(Clone)]
pub struct EvolutionFamily {
    dim: usize,
    kind: FamilyKind,
    label: String,
    propagator: Arc<dyn Propagator>,
    generator: Option<MatFn>,
    settings: Option<IntegratorSettings>,
    jumps: Jumps,
    metadata: BTreeMap<String, f64>,
    /// `T(t, t)` as a multiple of the identity, 1 except for scaled families
    diagonal: f64,
}

impl std::fmt::Debug for EvolutionFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EvolutionFamily")
            .field("dim", &self.dim)
            .field("kind", &self.kind)
            .field("label", &self.label)
            .field("settings", &self.settings)
            .field("metadata", &self.metadata)
            .finish_non_exhaustive()
    }
}

impl EvolutionFamily {
    /// Family given by an explicit formula `(t, tau) -> T(t, tau)`.
    pub fn closed_form<F>(dim: usize, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64, f64) -> Mat + Send + Sync + 'static,
    {
        Self::custom(dim, FamilyKind::ClosedForm, label, Arc::new(ClosedForm(f)))
    }

    /// `T(t, tau) = A_{floor(t)-1} ... A_{floor(tau)}`, the identity when both
    /// times share a unit interval.
    pub fn discrete_product<F>(dim: usize, label: impl Into<String>, factor: F) -> Self
    where
        F: Fn(u64) -> Mat + Send + Sync + 'static,
    {
        let mut fam = Self::custom(dim, FamilyKind::DiscreteProduct, label, Arc::new(DiscreteProduct { factor, dim }));
        fam.jumps = Jumps::Integers;
        fam
    }

    /// Wraps an arbitrary propagator.
    pub fn custom(dim: usize, kind: FamilyKind, label: impl Into<String>, propagator: Arc<dyn Propagator>) -> Self {
        EvolutionFamily {
            dim,
            kind,
            label: label.into(),
            propagator,
            generator: None,
            settings: None,
            jumps: Jumps::None,
            metadata: BTreeMap::new(),
            diagonal: 1.0,
        }
    }

    /// The identity family on `R^d`.
    pub fn identity(dim: usize) -> Self {
        Self::closed_form(dim, "identity", move |_, _| Mat::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn generator(&self) -> Option<&MatFn> {
        self.generator.as_ref()
    }

    pub fn integrator_settings(&self) -> Option<&IntegratorSettings> {
        self.settings.as_ref()
    }

    pub fn metadata(&self) -> &BTreeMap<String, f64> {
        &self.metadata
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: f64) -> Self {
        self.metadata.insert(key.into(), value);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Marks the family as jumping at integer times (it then skips the
    /// continuity check and its breakpoints enter sample sets).
    pub fn with_integer_jumps(mut self, jumps: bool) -> Self {
        self.jumps = if jumps { Jumps::Integers } else { Jumps::None };
        self
    }

    pub fn has_jumps(&self) -> bool {
        self.jumps != Jumps::None
    }

    /// Jump times in `[1, t_max]`.
    pub fn breakpoints(&self, t_max: f64) -> Vec<f64> {
        match self.jumps {
            Jumps::None => Vec::new(),
            Jumps::Integers => (1..=t_max.floor() as u64).map(|n| n as f64).collect(),
        }
    }

    /// `T(t, tau)`.
    pub fn evaluate(&self, t: f64, tau: f64) -> Result<Mat> {
        if !(tau >= 1.0) || !(t >= tau) || !t.is_finite() {
            return Err(Error::Domain { t, tau });
        }
        if t == tau {
            return Ok(Mat::identity(self.dim, self.dim) * self.diagonal);
        }
        self.propagator.propagate(t, tau)
    }

    /// `T(t, tau) x`.
    pub fn apply(&self, t: f64, tau: f64, x: &Vector) -> Result<Vector> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        Ok(self.evaluate(t, tau)? * x)
    }

    /// `c T(t, tau)`; violates `T(t, t) = Id` unless `c = 1`, used to probe
    /// the scale behaviour of the fits.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut fam = self.clone();
        fam.propagator = Arc::new(Scaled { inner: Arc::clone(&self.propagator), factor });
        fam.label = format!("{factor}*{}", self.label);
        fam.kind = FamilyKind::ClosedForm;
        fam.generator = None;
        fam.settings = None;
        fam.diagonal = self.diagonal * factor;
        fam
    }

    /// Left limit `lim_{s -> t^-} T(t, s)`, which differs from the identity
    /// only at the jumps of a discontinuous family. `prev < t` is a time in the
    /// same continuity piece just before `t`.
    pub fn left_limit(&self, t: f64, prev: f64) -> Result<Mat> {
        match self.jumps {
            Jumps::Integers if t.fract() == 0.0 && t > 1.0 => {
                let s = (t - 1e-9 * t).max(prev);
                self.evaluate(t, s)
            }
            _ => Ok(Mat::identity(self.dim, self.dim)),
        }
    }

    /// One-step maps `T(nodes[k+1], nodes[k])`, evaluated in parallel.
    pub fn step_maps(&self, nodes: &[f64]) -> Result<Vec<Mat>> {
        nodes.par_windows(2).map(|w| self.evaluate(w[1], w[0])).collect()
    }
}

/// Generator-defined family solving `X' = A(t) X, X(tau) = Id`.
pub fn from_generator(a: MatFn, dim: usize, settings: IntegratorSettings) -> EvolutionFamily {
    let prop = GeneratorPropagator { a: Arc::clone(&a), dim, settings, segments: Mutex::new(HashMap::new()) };
    let mut fam = EvolutionFamily::custom(dim, FamilyKind::Generator, "generator", Arc::new(prop));
    fam.generator = Some(a);
    fam.settings = Some(settings);
    fam
}

/// Samples of a generator `t -> A(t)` with piecewise-linear interpolation,
/// held constant outside the sampled range.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorTable {
    pub times: Vec<f64>,
    pub matrices: Vec<Mat>,
}

impl GeneratorTable {
    pub fn dim(&self) -> usize {
        self.matrices.first().map_or(0, |m| m.nrows())
    }

    pub fn at(&self, t: f64) -> Mat {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.matrices[0].clone();
        }
        if t >= self.times[n - 1] {
            return self.matrices[n - 1].clone();
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        &self.matrices[k] * (1.0 - w) + &self.matrices[k + 1] * w
    }

    /// Reads rows `t, a_11, a_12, ..., a_dd` (row-major). A header row is
    /// allowed when its first field is not numeric.
    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr =
            csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
        let mut times = Vec::new();
        let mut matrices = Vec::new();
        let mut dim = 0usize;
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.is_empty() {
                continue;
            }
            if line == 0 && rec[0].parse::<f64>().is_err() {
                continue;
            }
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>().map_err(|_| Error::invalid(format!("non-numeric field `{s}` in generator table")))
                })
                .collect::<Result<_>>()?;
            let entries = vals.len() - 1;
            let d = (entries as f64).sqrt().round() as usize;
            if d == 0 || d * d != entries {
                return Err(Error::invalid(format!("row with {entries} entries is not a square matrix")));
            }
            if dim == 0 {
                dim = d;
            } else if d != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: d });
            }
            times.push(vals[0]);
            matrices.push(Mat::from_row_slice(d, d, &vals[1..]));
        }
        if times.is_empty() {
            return Err(Error::invalid("generator table is empty"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("generator table times must be strictly increasing"));
        }
        Ok(GeneratorTable { times, matrices })
    }

    pub fn into_family(self, settings: IntegratorSettings) -> EvolutionFamily {
        let dim = self.dim();
        let table = Arc::new(self);
        from_generator(Arc::new(move |t| table.at(t)), dim, settings).with_label("tabulated generator")
    }
}

/// Generator family from a CSV table (see [`GeneratorTable::read_csv`]).
pub fn load_generator_csv(path: impl AsRef<Path>, settings: IntegratorSettings) -> Result<EvolutionFamily> {
    let file = std::fs::File::open(path)?;
    Ok(GeneratorTable::read_csv(file)?.into_family(settings))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocycleReport {
    pub max_residual: f64,
    /// `(t, s, tau)` attaining the maximum
    pub worst_triple: (f64, f64, f64),
    /// largest `||T(t, t) - Id||` over the grid
    pub identity_residual: f64,
    pub triples: usize,
    pub tol: f64,
    pub pass: bool,
}

/// Cocycle residual `||T(t,s) T(s,tau) - T(t,tau)||` over all triples
/// `t >= s >= tau` drawn from `grid`.
pub fn check_cocycle(family: &EvolutionFamily, grid: &[f64], tol: f64) -> Result<CocycleReport> {
    if grid.windows(2).any(|w| w[1] < w[0]) || grid.iter().any(|&t| !(t >= 1.0)) {
        return Err(Error::invalid("cocycle grid must be sorted with all points >= 1"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("cocycle tolerance must be positive"));
    }
    let n = grid.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|j| (j..n).map(move |i| (i, j))).collect();
    let maps: HashMap<(usize, usize), Mat> = pairs
        .par_iter()
        .map(|&(i, j)| family.evaluate(grid[i], grid[j]).map(|m| ((i, j), m)))
        .collect::<Result<_>>()?;
    let identity = Mat::identity(family.dim(), family.dim());
    let identity_residual = (0..n).map(|i| op_norm(&(&maps[&(i, i)] - &identity))).fold(0.0, f64::max);
    let triples: Vec<(usize, usize, usize)> =
        (0..n).flat_map(|k| (k..n).flat_map(move |j| (j..n).map(move |i| (i, j, k)))).collect();
    let (max_residual, worst) = triples
        .par_iter()
        .map(|&(i, j, k)| {
            let r = op_norm(&(&maps[&(i, j)] * &maps[&(j, k)] - &maps[&(i, k)]));
            (r, (grid[i], grid[j], grid[k]))
        })
        .reduce(|| (0.0, (1.0, 1.0, 1.0)), |a, b| if b.0 > a.0 { b } else { a });
    Ok(CocycleReport {
        max_residual,
        worst_triple: worst,
        identity_residual,
        triples: triples.len(),
        tol,
        pass: max_residual <= tol && identity_residual <= tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    /// largest normalized increment `||x(t_{k+1}) - x(t_k)||` per refinement level
    pub max_jumps: Vec<f64>,
    /// `true` when the family jumps by construction and is exempt
    pub exempt: bool,
    pub pass: bool,
}

/// Sampled continuity of `t -> T(t, tau) x` on `[tau, t_max]`: the largest
/// increment between neighbouring log-grid points, normalized by the orbit's
/// size, must roughly halve each time the grid is refined.
pub fn check_continuity(
    family: &EvolutionFamily,
    tau: f64,
    x: &Vector,
    t_max: f64,
    levels: usize,
) -> Result<ContinuityReport> {
    let mut max_jumps = Vec::with_capacity(levels);
    for level in 0..levels {
        let n = 32usize << level;
        let ts = log_spaced(tau, t_max, n + 1);
        let orbit: Vec<Vector> = ts.par_iter().map(|&t| family.apply(t, tau, x)).collect::<Result<_>>()?;
        let scale = orbit.iter().map(|v| v.norm()).fold(x.norm(), f64::max).max(f64::MIN_POSITIVE);
        let jump = orbit.windows(2).map(|w| (&w[1] - &w[0]).norm()).fold(0.0, f64::max) / scale;
        max_jumps.push(jump);
    }
    let exempt = family.has_jumps();
    let shrinking = max_jumps.windows(2).all(|w| w[1] <= 0.75 * w[0] || w[0] < 1e-12);
    Ok(ContinuityReport { max_jumps, exempt, pass: exempt || shrinking })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn checkpoints_bracket_times() {
        assert_eq!(checkpoint_at_or_after(1.0), 0);
        assert_eq!(checkpoint_at_or_after(3.0), 2);
        assert_eq!(checkpoint_at_or_after(4.0), 2);
        assert_eq!(checkpoint_at_or_before(4.0), 2);
        assert_eq!(checkpoint_at_or_before(7.9), 2);
        assert_eq!(checkpoint_at_or_before(1.5), 0);
    }

    #[test]
    fn domain_is_enforced() {
        let fam = EvolutionFamily::identity(2);
        assert!(matches!(fam.evaluate(1.0, 2.0), Err(Error::Domain { .. })));
        assert!(matches!(fam.evaluate(2.0, 0.5), Err(Error::Domain { .. })));
    }

    #[test]
    fn generator_matches_power_law_across_checkpoints() {
        let a: MatFn = Arc::new(|t| Mat::from_element(1, 1, -1.0 / t));
        let fam = from_generator(a, 1, IntegratorSettings::default());
        for &(t, tau) in &[(10.0, 1.0), (3.0, 1.5), (1000.0, 3.7), (2.0, 2.0)] {
            let v = fam.evaluate(t, tau).unwrap()[(0, 0)];
            assert_relative_eq!(v, tau / t, max_relative = 1e-9);
        }
    }

    #[test]
    fn zero_generator_gives_identity() {
        let a: MatFn = Arc::new(|_| Mat::zeros(3, 3));
        let fam = from_generator(a, 3, IntegratorSettings::default());
        assert_eq!(fam.evaluate(50.0, 1.3).unwrap(), Mat::identity(3, 3));
    }

    #[test]
    fn discrete_product_uses_floor() {
        let fam = EvolutionFamily::discrete_product(1, "doubling", |_| Mat::from_element(1, 1, 2.0));
        assert_eq!(fam.evaluate(3.9, 3.1).unwrap()[(0, 0)], 1.0);
        assert_eq!(fam.evaluate(5.0, 2.5).unwrap()[(0, 0)], 8.0);
        assert_eq!(fam.left_limit(5.0, 4.5).unwrap()[(0, 0)], 2.0);
        assert_eq!(fam.left_limit(4.5, 4.2).unwrap()[(0, 0)], 1.0);
    }

    #[test]
    fn generator_table_round_trip() {
        let csv = "t,a11\n1,-1\n3,-3\n";
        let table = GeneratorTable::read_csv(csv.as_bytes()).unwrap();
        assert_eq!(table.dim(), 1);
        assert_relative_eq!(table.at(2.0)[(0, 0)], -2.0);
        assert_relative_eq!(table.at(10.0)[(0, 0)], -3.0);
        assert!(GeneratorTable::read_csv("1,2,3\n".as_bytes()).is_err());
    }

    #[test]
    fn cocycle_of_closed_form_is_exact() {
        let fam = EvolutionFamily::closed_form(1, "contraction", |t, tau| Mat::from_element(1, 1, tau / t));
        let rep = check_cocycle(&fam, &[1.0, 2.0, 4.0, 8.0], 1e-12).unwrap();
        assert!(rep.pass);
        assert!(rep.max_residual < 1e-15);
        assert_eq!(rep.triples, 20);
    }

    #[test]
    fn continuity_separates_smooth_and_jumping_families() {
        let smooth = EvolutionFamily::closed_form(1, "c", |t, tau| Mat::from_element(1, 1, tau / t));
        let x = Vector::from_element(1, 1.0);
        assert!(check_continuity(&smooth, 1.0, &x, 100.0, 3).unwrap().pass);
        let jumpy = EvolutionFamily::closed_form(1, "j", |t, _| Mat::from_element(1, 1, t.floor()));
        assert!(!check_continuity(&jumpy, 1.0, &x, 10.0, 3).unwrap().pass);
    }
}
