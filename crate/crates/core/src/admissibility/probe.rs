use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::function::GridFunction;
use super::green::{AdmissibilityReport, GreenOptions, GreenSolver};
use crate::dichotomy::{orbit_exponent, ProjectionFamily};
use crate::error::{Error, Result};
use crate::evolution::EvolutionFamily;
use crate::grid::TimeGrid;
use crate::linalg::{projection_range, random_unit_in_span, Mat, Vector};
use crate::norms::NormFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Uniqueness {
    Unique,
    NotUnique,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    /// fitted growth exponents of `||T(t,1) z||_t` for the random `z`
    pub exponents: Vec<f64>,
    pub margin: f64,
    pub verdict: Uniqueness,
}

/// Homogeneous solutions starting in `span(z)` must be unbounded: every
/// random `z` needs a fitted exponent above `margin`.
pub fn uniqueness_probe(
    family: &EvolutionFamily,
    norms: &NormFamily,
    z: &Mat,
    trials: usize,
    t_max: f64,
    seed: u64,
) -> Result<UniquenessReport> {
    let margin = 0.05;
    if z.ncols() == 0 {
        return Ok(UniquenessReport { exponents: Vec::new(), margin, verdict: Uniqueness::Unique });
    }
    if z.nrows() != family.dim() {
        return Err(Error::DimensionMismatch { expected: family.dim(), found: z.nrows() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zs: Vec<Vector> = (0..trials.max(1)).map(|_| random_unit_in_span(z, &mut rng)).collect();
    let exponents: Vec<f64> =
        zs.par_iter().map(|v| orbit_exponent(family, norms, v, 1.0, t_max, 32)).collect::<Result<_>>()?;
    let verdict = if exponents.iter().all(|&e| e > margin) {
        Uniqueness::Unique
    } else if exponents.iter().any(|&e| e < -margin) {
        Uniqueness::NotUnique
    } else {
        Uniqueness::Inconclusive
    };
    Ok(UniquenessReport { exponents, margin, verdict })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryMember {
    pub name: String,
    pub y: GridFunction,
}

/// Starting times of the unit bumps in the default battery.
pub const BUMP_TIMES: [f64; 6] = [1.0, 3.0, 10.0, 31.0, 100.0, 316.0];

/// Constants `e_i`, unit bumps `chi_[tau, tau+1](s) T(s, tau) e_i` and tails
/// `e_i / s`, optionally with the zero function.
pub fn default_battery(family: &EvolutionFamily, grid: &TimeGrid, include_zero: bool) -> Result<Vec<BatteryMember>> {
    let d = family.dim();
    let basis = |i: usize| Vector::from_fn(d, |r, _| if r == i { 1.0 } else { 0.0 });
    let mut out = Vec::new();
    for i in 0..d {
        let e = basis(i);
        out.push(BatteryMember { name: format!("const-e{}", i + 1), y: GridFunction::from_fn(grid, |_| e.clone())? });
    }
    for &tau in BUMP_TIMES.iter().filter(|&&tau| tau + 1.0 <= grid.t_max()) {
        for i in 0..d {
            let e = basis(i);
            let values = grid
                .nodes()
                .iter()
                .map(|&s| if s >= tau && s <= tau + 1.0 { family.apply(s, tau, &e) } else { Ok(Vector::zeros(d)) })
                .collect::<Result<Vec<_>>>()?;
            out.push(BatteryMember {
                name: format!("bump{tau}-e{}", i + 1),
                y: GridFunction::new(grid.nodes().to_vec(), values)?,
            });
        }
    }
    for i in 0..d {
        let e = basis(i);
        out.push(BatteryMember { name: format!("tail-e{}", i + 1), y: GridFunction::from_fn(grid, |s| &e / s)? });
    }
    if include_zero {
        out.push(BatteryMember { name: "zero".into(), y: GridFunction::zeros(grid, d) });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberReport {
    pub name: String,
    pub report: AdmissibilityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilitySummary {
    pub members: Vec<MemberReport>,
    /// `max ||x||_inf / ||y||_L`, an empirical lower bound on the Green operator norm
    pub worst_ratio: f64,
    pub worst_residual: f64,
    pub uniqueness: UniquenessReport,
    pub admissible: bool,
}

/// Green solve, residual check and norm ratios for every battery member,
/// plus a uniqueness probe on `Z` (default `Im Q(1)`).
pub fn admissibility_probe(
    family: &EvolutionFamily,
    proj: &ProjectionFamily,
    norms: &NormFamily,
    battery: &[BatteryMember],
    z: Option<&Mat>,
    options: &GreenOptions,
    seed: u64,
) -> Result<AdmissibilitySummary> {
    let first = battery.first().ok_or_else(|| Error::invalid("admissibility battery is empty"))?;
    let nodes = first.y.nodes();
    let solver = GreenSolver::new(family, proj, nodes)?;
    let members: Vec<MemberReport> = battery
        .par_iter()
        .map(|m| {
            let (_, report) = solver.solve_with_report(&m.y, norms, options)?;
            Ok(MemberReport { name: m.name.clone(), report })
        })
        .collect::<Result<_>>()?;
    let z = match z {
        Some(z) => z.clone(),
        None => projection_range(&proj.complement_at(1.0)?),
    };
    let t_max = *nodes.last().expect("non-empty grid");
    let uniqueness = uniqueness_probe(family, norms, &z, 8, t_max, seed)?;
    let worst_ratio = members.iter().map(|m| m.report.ratio).fold(0.0, f64::max);
    let worst_residual = members.iter().map(|m| m.report.residual).fold(0.0, f64::max);
    let admissible = members.iter().all(|m| m.report.pass) && uniqueness.verdict != Uniqueness::NotUnique;
    Ok(AdmissibilitySummary { members, worst_ratio, worst_residual, uniqueness, admissible })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{scenario, ScenarioSpec};
    use crate::norms::constant_norm;

    #[test]
    fn uniqueness_on_diagonal_dichotomy() {
        let s = scenario(&ScenarioSpec::new("diag_dichotomy")).unwrap();
        let n = constant_norm(2);
        let good = Mat::from_column_slice(2, 1, &[0.0, 1.0]);
        let bad = Mat::from_column_slice(2, 1, &[1.0, 0.0]);
        let r = uniqueness_probe(&s.family, &n, &good, 4, 1000.0, 0).unwrap();
        assert_eq!(r.verdict, Uniqueness::Unique);
        assert!((r.exponents[0] - 1.0).abs() < 1e-9);
        assert_eq!(uniqueness_probe(&s.family, &n, &bad, 4, 1000.0, 0).unwrap().verdict, Uniqueness::NotUnique);
        let empty = Mat::zeros(2, 0);
        assert_eq!(uniqueness_probe(&s.family, &n, &empty, 4, 1000.0, 0).unwrap().verdict, Uniqueness::Unique);
    }

    #[test]
    fn battery_layout() {
        let s = scenario(&ScenarioSpec::new("diag_dichotomy")).unwrap();
        let grid = TimeGrid::new(100.0, 64).unwrap();
        let b = default_battery(&s.family, &grid, true).unwrap();
        // 2 constants, 4 bump times x 2, 2 tails, zero
        assert_eq!(b.len(), 2 + 8 + 2 + 1);
        let bump = &b.iter().find(|m| m.name == "bump10-e2").unwrap().y;
        assert!((bump.eval(10.5)[1] - 1.05).abs() < 1e-12);
        assert_eq!(bump.eval(12.0)[1], 0.0);
    }

    #[test]
    fn expansion_is_admissible() {
        let s = scenario(&ScenarioSpec::new("scalar_expansion")).unwrap();
        let grid = TimeGrid::new(1000.0, 64).unwrap();
        let battery = default_battery(&s.family, &grid, true).unwrap();
        let sum = admissibility_probe(
            &s.family,
            &ProjectionFamily::zero(1),
            &constant_norm(1),
            &battery,
            None,
            &GreenOptions::default(),
            0,
        )
        .unwrap();
        assert!(sum.admissible, "{sum:?}");
        assert_eq!(sum.uniqueness.verdict, Uniqueness::Unique);
    }
}
