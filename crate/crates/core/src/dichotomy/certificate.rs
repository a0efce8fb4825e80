use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ProjectionFamily;
use crate::error::{Error, Result};
use crate::evolution::EvolutionFamily;
use crate::fit::{drift, envelope_intercept, least_squares};
use crate::grid::SamplePairs;
use crate::linalg::{
    op_norm, projection_range, random_unit_in_span, restricted_inverse, top_right_singular_vector, Mat, Vector,
};
use crate::norms::NormFamily;

pub const CERTIFICATE_SCHEMA: &str = "polydich/certificate@1";

/// Bin width (in `ln tau`) of the drift test: three bins per decade.
pub const DRIFT_BIN: f64 = std::f64::consts::LN_10 / 3.0;

/// Envelope constants growing faster than `tau^DRIFT_LIMIT` are treated as
/// non-uniform (no valid constant exists on the sampled range).
pub const DRIFT_LIMIT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Stable,
    Unstable,
    Growth,
}

/// One sampled pair: `log_ratio = log(t/tau)`, `log_gain` the largest
/// observed `log(||image||/||x||)` over probes, `residual` its excess over the
/// fitted envelope (never positive on the samples used for the fit).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub side: Side,
    pub tau: f64,
    pub t: f64,
    pub log_ratio: f64,
    pub log_gain: f64,
    pub residual: f64,
}

/// Fitted `log gain <= log D + slope log(t/tau)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub slope: f64,
    pub constant: f64,
    /// slope of the per-bin maximal residuals against the log of the initial time
    pub drift: f64,
    pub points: usize,
}

fn fit_envelope(rows: &mut [ResidualRow], min_constant: f64) -> Option<EnvelopeFit> {
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.log_ratio, r.log_gain)).collect();
    let line = least_squares(&pts)?;
    let log_d = envelope_intercept(&pts, line.slope).max(min_constant.ln());
    let mut dpts = Vec::with_capacity(rows.len());
    for r in rows.iter_mut() {
        r.residual = r.log_gain - (log_d + line.slope * r.log_ratio);
        let initial = if r.side == Side::Unstable { r.t } else { r.tau };
        dpts.push((initial.ln(), r.log_gain - line.slope * r.log_ratio));
    }
    Some(EnvelopeFit { slope: line.slope, constant: log_d.exp(), drift: drift(&dpts, DRIFT_BIN), points: rows.len() })
}

/// Polynomial bounded-growth constants `||T(t,s)x||_t <= M (t/s)^a ||x||_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundedGrowth {
    pub m: f64,
    pub a: f64,
    pub drift: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub residuals: Vec<ResidualRow>,
}

/// Projection bound data: `sup ||P(tau)||`, `min gamma(tau)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionBound {
    pub sup_norm: f64,
    pub gamma_min: f64,
    pub bound: f64,
    pub worst_slack: f64,
    pub per_tau: Vec<ProjectionBoundRow>,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionBoundRow {
    pub tau: f64,
    pub norm: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomyCertificate {
    pub schema: String,
    pub family: String,
    pub dim: usize,
    pub stable_rank: usize,
    pub lambda_stable: Option<f64>,
    pub lambda_unstable: Option<f64>,
    pub d: f64,
    pub d_stable: Option<f64>,
    pub d_unstable: Option<f64>,
    /// growth exponent of the constants in the initial time (nonuniform reading)
    pub epsilon_stable: Option<f64>,
    pub epsilon_unstable: Option<f64>,
    pub bounded_growth: Option<BoundedGrowth>,
    pub projection: Option<ProjectionBound>,
    pub pairs: usize,
    pub probes: usize,
    pub seed: Option<u64>,
    pub verdict: Verdict,
    pub residuals: Vec<ResidualRow>,
}

impl DichotomyCertificate {
    /// `lambda = min(lambda_stable, lambda_unstable)` over the nontrivial sides.
    pub fn lambda(&self) -> Option<f64> {
        match (self.lambda_stable, self.lambda_unstable) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Recomputes the verdict from the fitted quantities.
    pub fn finalize(&mut self) {
        let mut reasons = Vec::new();
        let sides = [
            ("stable", self.stable_rank > 0, self.lambda_stable, self.epsilon_stable),
            ("unstable", self.stable_rank < self.dim, self.lambda_unstable, self.epsilon_unstable),
        ];
        for (name, present, lambda, eps) in sides {
            if !present {
                continue;
            }
            match lambda {
                None => reasons.push(format!("{name} side: not enough distinct ratios to fit an exponent")),
                Some(l) if !(l > 0.0) => reasons.push(format!("{name} exponent {l:.4} is not positive")),
                _ => {}
            }
            if let Some(e) = eps {
                if e > DRIFT_LIMIT {
                    reasons.push(format!(
                        "{name} envelope constant grows like tau^{e:.3} (limit {DRIFT_LIMIT}); no uniform constant"
                    ));
                }
            }
        }
        if !self.d.is_finite() {
            reasons.push("envelope constant is not finite".into());
        }
        if let Some(bg) = &self.bounded_growth {
            if !bg.pass {
                reasons.push(format!("no polynomial bounded-growth envelope (drift {:.3})", bg.drift));
            }
        }
        if let Some(pb) = &self.projection {
            if !(pb.gamma_min > 0.0) {
                reasons.push("splitting angle gamma vanishes".into());
            }
            if !pb.pass {
                reasons.push(format!("projection norm exceeds 2/gamma by {:.3e}", pb.worst_slack));
            }
        }
        self.verdict = Verdict { pass: reasons.is_empty(), reasons };
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Point clouds `(side, tau, t, log_ratio, log_gain, residual)`.
    pub fn write_points_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["side", "tau", "t", "log_ratio", "log_gain", "residual"])?;
        let growth = self.bounded_growth.iter().flat_map(|b| b.residuals.iter());
        for r in self.residuals.iter().chain(growth) {
            let side = match r.side {
                Side::Stable => "stable",
                Side::Unstable => "unstable",
                Side::Growth => "growth",
            };
            wtr.write_record(&[
                side.to_string(),
                r.tau.to_string(),
                r.t.to_string(),
                r.log_ratio.to_string(),
                r.log_gain.to_string(),
                r.residual.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn kernel_basis(proj: &ProjectionFamily, t: f64) -> Result<Mat> {
    Ok(projection_range(&proj.complement_at(t)?))
}

/// Largest `log(||m x||_{at} / ||x||_{from})` over the probes and the top
/// right singular vector of `m`; `None` when every image vanishes.
fn max_log_gain(m: &Mat, probes: &[Vector], norms: &NormFamily, from: f64, at: f64) -> Result<Option<f64>> {
    let n_from = norms.at(from)?;
    let n_at = norms.at(at)?;
    let mut best: Option<f64> = None;
    let top = top_right_singular_vector(m);
    for x in probes.iter().chain(top.iter()) {
        let image = m * x;
        let num = n_at.norm(&image)?;
        if num == 0.0 {
            continue;
        }
        let den = n_from.norm(x)?;
        if den == 0.0 {
            continue;
        }
        let g = (num / den).ln();
        best = Some(best.map_or(g, |b: f64| b.max(g)));
    }
    Ok(best)
}

/// Fits `(lambda, D)` for the contraction on `Im P` and the backward
/// contraction on `Ker P` over the sample pairs `(tau, t)`, `tau <= t`.
pub fn fit_dichotomy(
    family: &EvolutionFamily,
    norms: &NormFamily,
    proj: &ProjectionFamily,
    samples: &SamplePairs,
) -> Result<DichotomyCertificate> {
    let d = family.dim();
    if norms.dim() != d || proj.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: norms.dim().min(proj.dim()) });
    }
    let rank = proj.rank();
    let (has_s, has_u) = (rank > 0, rank < d);
    let rows: Vec<(Option<ResidualRow>, Option<ResidualRow>)> = samples
        .pairs
        .par_iter()
        .map(|&(tau, t)| {
            let m = family.evaluate(t, tau)?;
            let lr = (t / tau).ln();
            let stable = if has_s {
                let mp = &m * proj.at(tau)?;
                max_log_gain(&mp, &samples.vectors, norms, tau, t)?.map(|g| ResidualRow {
                    side: Side::Stable,
                    tau,
                    t,
                    log_ratio: lr,
                    log_gain: g,
                    residual: 0.0,
                })
            } else {
                None
            };
            let unstable = if has_u {
                let back = restricted_inverse(&m, &kernel_basis(proj, tau)?, tau, t)?;
                let mq = back * proj.complement_at(t)?;
                max_log_gain(&mq, &samples.vectors, norms, t, tau)?.map(|g| ResidualRow {
                    side: Side::Unstable,
                    tau,
                    t,
                    log_ratio: lr,
                    log_gain: g,
                    residual: 0.0,
                })
            } else {
                None
            };
            Ok((stable, unstable))
        })
        .collect::<Result<_>>()?;
    let mut stable_rows: Vec<ResidualRow> = rows.iter().filter_map(|r| r.0).collect();
    let mut unstable_rows: Vec<ResidualRow> = rows.iter().filter_map(|r| r.1).collect();
    let fs = if has_s { fit_envelope(&mut stable_rows, 1.0) } else { None };
    let fu = if has_u { fit_envelope(&mut unstable_rows, 1.0) } else { None };
    let d_const = [fs.as_ref(), fu.as_ref()].iter().flatten().map(|f| f.constant).fold(1.0, f64::max);
    let mut residuals = stable_rows;
    residuals.extend(unstable_rows);
    let mut cert = DichotomyCertificate {
        schema: CERTIFICATE_SCHEMA.into(),
        family: family.label().to_string(),
        dim: d,
        stable_rank: rank,
        lambda_stable: fs.as_ref().map(|f| -f.slope),
        lambda_unstable: fu.as_ref().map(|f| -f.slope),
        d: d_const,
        d_stable: fs.as_ref().map(|f| f.constant),
        d_unstable: fu.as_ref().map(|f| f.constant),
        epsilon_stable: fs.as_ref().map(|f| f.drift),
        epsilon_unstable: fu.as_ref().map(|f| f.drift),
        bounded_growth: None,
        projection: None,
        pairs: samples.pairs.len(),
        probes: samples.vectors.len(),
        seed: None,
        verdict: Verdict { pass: false, reasons: Vec::new() },
        residuals,
    };
    cert.finalize();
    Ok(cert)
}

/// Fits `(M, a)` with `a >= 0`; fails when the envelope constant drifts with
/// the initial time, i.e. no polynomial bound holds on the samples.
pub fn fit_bounded_growth(
    family: &EvolutionFamily,
    norms: &NormFamily,
    samples: &SamplePairs,
) -> Result<BoundedGrowth> {
    let rows: Vec<Option<ResidualRow>> = samples
        .pairs
        .par_iter()
        .map(|&(s, t)| {
            let m = family.evaluate(t, s)?;
            Ok(max_log_gain(&m, &samples.vectors, norms, s, t)?.map(|g| ResidualRow {
                side: Side::Growth,
                tau: s,
                t,
                log_ratio: (t / s).ln(),
                log_gain: g,
                residual: 0.0,
            }))
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<ResidualRow> = rows.into_iter().flatten().collect();
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.log_ratio, r.log_gain)).collect();
    let slope = least_squares(&pts).map_or(0.0, |f| f.slope).max(0.0);
    let log_m = if pts.is_empty() { 0.0 } else { envelope_intercept(&pts, slope) };
    let mut dpts = Vec::with_capacity(rows.len());
    for r in rows.iter_mut() {
        r.residual = r.log_gain - (log_m + slope * r.log_ratio);
        dpts.push((r.tau.ln(), r.log_gain - slope * r.log_ratio));
    }
    let dr = drift(&dpts, DRIFT_BIN);
    Ok(BoundedGrowth {
        m: log_m.exp(),
        a: slope,
        drift: dr,
        pass: dr <= DRIFT_LIMIT && log_m.is_finite(),
        residuals: rows,
    })
}

/// Estimates `gamma(tau) = inf ||v_s + v_u||_tau` over unit `v_s` in `Im P`,
/// `v_u` in `Ker P`, and checks `||P(tau)|| <= 2 / gamma(tau)`.
pub fn projection_norm_bound(
    proj: &ProjectionFamily,
    norms: &NormFamily,
    taus: &[f64],
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<ProjectionBound> {
    let d = proj.dim();
    let rank = proj.rank();
    let trivial = rank == 0 || rank == d;
    let per_tau: Vec<ProjectionBoundRow> = taus
        .par_iter()
        .enumerate()
        .map(|(i, &tau)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let p = proj.at(tau)?;
            let local = norms.at(tau)?;
            let q = Mat::identity(d, d) - &p;
            // operator norm of P in ||.||_tau over probes
            let mut probes: Vec<Vector> = crate::linalg::random_unit_vectors(d, samples, &mut rng);
            probes.extend(top_right_singular_vector(&p));
            let mut norm = if trivial { op_norm(&p) } else { 0.0f64 };
            for x in &probes {
                let den = local.norm(x)?;
                if den > 0.0 {
                    norm = norm.max(local.norm(&(&p * x))? / den);
                }
            }
            if trivial {
                return Ok(ProjectionBoundRow { tau, norm, gamma: f64::INFINITY });
            }
            let rs = projection_range(&p);
            let ru = projection_range(&q);
            let unit = |v: Vector| -> Result<Vector> {
                let n = local.norm(&v)?;
                Ok(v / n)
            };
            let mut gamma = f64::INFINITY;
            let mut consider = |vs: &Vector, vu: &Vector| -> Result<()> {
                gamma = gamma.min(local.norm(&(vs + vu))?).min(local.norm(&(vs - vu))?);
                Ok(())
            };
            if rs.ncols() == 1 && ru.ncols() == 1 {
                let vs = unit(rs.column(0).into_owned())?;
                let vu = unit(ru.column(0).into_owned())?;
                consider(&vs, &vu)?;
            } else {
                for x in &probes {
                    let (a, b) = (&p * x, &q * x);
                    if a.norm() > 1e-14 && b.norm() > 1e-14 {
                        consider(&unit(a)?, &unit(b)?)?;
                    }
                }
                for _ in 0..samples {
                    let vs = unit(random_unit_in_span(&rs, &mut rng))?;
                    let vu = unit(random_unit_in_span(&ru, &mut rng))?;
                    consider(&vs, &vu)?;
                }
            }
            Ok(ProjectionBoundRow { tau, norm, gamma })
        })
        .collect::<Result<_>>()?;
    let sup_norm = per_tau.iter().map(|r| r.norm).fold(0.0, f64::max);
    let gamma_min = per_tau.iter().map(|r| r.gamma).fold(f64::INFINITY, f64::min);
    let worst_slack = per_tau
        .iter()
        .map(|r| if r.gamma.is_finite() { r.norm - 2.0 / r.gamma } else { f64::NEG_INFINITY })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ProjectionBound {
        sup_norm,
        gamma_min,
        bound: if gamma_min.is_finite() { 2.0 / gamma_min } else { f64::INFINITY },
        worst_slack,
        pass: worst_slack <= tol,
        per_tau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{scenario, ScenarioSpec};
    use crate::grid::SampleConfig;
    use crate::norms::constant_norm;
    use approx::assert_abs_diff_eq;

    fn build(name: &str) -> (EvolutionFamily, ProjectionFamily) {
        let s = scenario(&ScenarioSpec::new(name)).unwrap();
        (s.family, s.projection.unwrap())
    }

    #[test]
    fn contraction_constants() {
        let (f, p) = build("scalar_contraction");
        let samples = SamplePairs::new(&SampleConfig::default(), 1, &[]);
        let c = fit_dichotomy(&f, &constant_norm(1), &p, &samples).unwrap();
        assert!(c.verdict.pass, "{:?}", c.verdict);
        assert_abs_diff_eq!(c.lambda_stable.unwrap(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(c.d, 1.0, epsilon = 1e-9);
        assert!(c.lambda_unstable.is_none());
    }

    #[test]
    fn expansion_growth() {
        let (f, _) = build("scalar_expansion");
        let samples = SamplePairs::new(&SampleConfig::default(), 1, &[]);
        let g = fit_bounded_growth(&f, &constant_norm(1), &samples).unwrap();
        assert!(g.pass);
        assert_abs_diff_eq!(g.a, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(g.m, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn counterexample_has_no_polynomial_growth() {
        let (f, p) = build("counterexample");
        let cfg = SampleConfig::default();
        let samples = SamplePairs::new(&cfg, 1, &f.breakpoints(cfg.t_max));
        let g = fit_bounded_growth(&f, &constant_norm(1), &samples).unwrap();
        assert!(!g.pass, "drift {}", g.drift);
        let c = fit_dichotomy(&f, &constant_norm(1), &p, &samples).unwrap();
        assert!(!c.verdict.pass);
    }

    #[test]
    fn orthogonal_splitting_angle() {
        let (_, p) = build("diag_dichotomy");
        let b = projection_norm_bound(&p, &constant_norm(2), &[1.0, 10.0], 16, 0, 1e-6).unwrap();
        assert_abs_diff_eq!(b.gamma_min, 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(b.sup_norm, 1.0, epsilon = 1e-12);
        assert!(b.pass);
    }

    #[test]
    fn trivial_projection_has_infinite_gamma() {
        let b = projection_norm_bound(&ProjectionFamily::identity(2), &constant_norm(2), &[1.0], 4, 0, 1e-6).unwrap();
        assert!(b.gamma_min.is_infinite());
        assert!(b.pass);
    }
}
