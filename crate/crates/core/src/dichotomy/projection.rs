use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::EvolutionFamily;
use crate::linalg::{op_norm, projection_rank, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionKind {
    Exact,
    ComputedFromZ,
    User,
}

pub type ProjFn = Arc<dyn Fn(f64) -> Result<Mat> + Send + Sync>;

/// Family of projections `P(t)` of constant rank.
#[derive(Clone)]
pub struct ProjectionFamily {
    dim: usize,
    rank: usize,
    kind: ProjectionKind,
    eval: ProjFn,
}

impl std::fmt::Debug for ProjectionFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProjectionFamily")
            .field("dim", &self.dim)
            .field("rank", &self.rank)
            .field("kind", &self.kind)
            .finish_non_exhaustive()
    }
}

impl ProjectionFamily {
    pub fn from_fn(dim: usize, rank: usize, kind: ProjectionKind, eval: ProjFn) -> Self {
        ProjectionFamily { dim, rank, kind, eval }
    }

    /// `P(t) = p` for all `t`.
    pub fn constant(p: Mat, kind: ProjectionKind) -> Self {
        let dim = p.nrows();
        let rank = projection_rank(&p);
        let p = Arc::new(p);
        ProjectionFamily { dim, rank, kind, eval: Arc::new(move |_| Ok((*p).clone())) }
    }

    /// Pure contraction mode, `P = Id`.
    pub fn identity(dim: usize) -> Self {
        Self::constant(Mat::identity(dim, dim), ProjectionKind::Exact)
    }

    /// Pure expansion mode, `P = 0`.
    pub fn zero(dim: usize) -> Self {
        Self::constant(Mat::zeros(dim, dim), ProjectionKind::Exact)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn kind(&self) -> ProjectionKind {
        self.kind
    }

    pub fn at(&self, t: f64) -> Result<Mat> {
        (self.eval)(t)
    }

    /// `Q(t) = Id - P(t)`.
    pub fn complement_at(&self, t: f64) -> Result<Mat> {
        Ok(Mat::identity(self.dim, self.dim) - self.at(t)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionReport {
    pub idempotence: f64,
    pub intertwining: f64,
    pub ranks: Vec<usize>,
    pub constant_rank: bool,
    pub pass: bool,
}

/// Idempotence, constant rank and `P(t) T(t, tau) = T(t, tau) P(tau)` on
/// samples. The intertwining defect is relative to `1 + ||T(t, tau)||`.
pub fn check_projection(
    proj: &ProjectionFamily,
    family: &EvolutionFamily,
    times: &[f64],
    pairs: &[(f64, f64)],
    tol: f64,
) -> Result<ProjectionReport> {
    if proj.dim() != family.dim() {
        return Err(Error::DimensionMismatch { expected: family.dim(), found: proj.dim() });
    }
    let per_time: Vec<(f64, usize)> = times
        .par_iter()
        .map(|&t| {
            let p = proj.at(t)?;
            Ok((op_norm(&(&p * &p - &p)), projection_rank(&p)))
        })
        .collect::<Result<_>>()?;
    let idempotence = per_time.iter().map(|v| v.0).fold(0.0, f64::max);
    let ranks: Vec<usize> = per_time.iter().map(|v| v.1).collect();
    let intertwining = pairs
        .par_iter()
        .map(|&(tau, t)| {
            let m = family.evaluate(t, tau)?;
            let d = &proj.at(t)? * &m - &m * proj.at(tau)?;
            Ok(op_norm(&d) / (1.0 + op_norm(&m)))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let constant_rank = ranks.windows(2).all(|w| w[0] == w[1]);
    Ok(ProjectionReport {
        idempotence,
        intertwining,
        pass: idempotence <= 1e-9 && intertwining <= tol && constant_rank,
        ranks,
        constant_rank,
    })
}
