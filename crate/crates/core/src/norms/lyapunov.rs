//! Lyapunov norms built from weighted suprema along orbits.

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;

use crate::dichotomy::ProjectionFamily;
use crate::error::{Error, Result};
use crate::evolution::EvolutionFamily;
use crate::linalg::{projection_range, restricted_inverse, Mat, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LyapunovParams {
    pub lambda: f64,
    /// third-term exponent of the strong variant
    pub b: Option<f64>,
    pub horizon: f64,
    pub density: usize,
    pub refine: usize,
}

/// Global log grid on `[1, horizon]` shared by every evaluation time, with
/// the one-step maps and kernel data cached on first use.
pub(crate) struct LyapunovData {
    pub family: EvolutionFamily,
    pub proj: ProjectionFamily,
    pub params: LyapunovParams,
    grid: Vec<f64>,
    steps: OnceLock<Result<Vec<Mat>>>,
    kernels: OnceLock<Result<Vec<Mat>>>,
    back_steps: OnceLock<Result<Vec<Mat>>>,
}

fn cached(cell: &OnceLock<Result<Vec<Mat>>>, f: impl FnOnce() -> Result<Vec<Mat>>) -> Result<&[Mat]> {
    match cell.get_or_init(f) {
        Ok(v) => Ok(v.as_slice()),
        Err(e) => Err(Error::invalid(format!("cached Lyapunov data unavailable: {e}"))),
    }
}

fn kernel_basis(proj: &ProjectionFamily, t: f64) -> Result<Mat> {
    Ok(projection_range(&proj.complement_at(t)?))
}

impl LyapunovData {
    pub fn new(family: EvolutionFamily, proj: ProjectionFamily, params: LyapunovParams) -> Result<Self> {
        if family.dim() != proj.dim() {
            return Err(Error::DimensionMismatch { expected: family.dim(), found: proj.dim() });
        }
        if !(params.lambda > 0.0) {
            return Err(Error::invalid(format!("Lyapunov exponent must be positive, got {}", params.lambda)));
        }
        if !(params.horizon > 1.0) || params.density == 0 {
            return Err(Error::invalid("Lyapunov norm needs horizon > 1 and a positive grid density"));
        }
        let decades = params.horizon.log10();
        let n = (decades * params.density as f64).ceil().max(1.0) as usize;
        let mut grid: Vec<f64> = (0..=n).map(|k| 10f64.powf(decades * k as f64 / n as f64)).collect();
        grid[0] = 1.0;
        grid[n] = params.horizon;
        Ok(LyapunovData {
            family,
            proj,
            params,
            grid,
            steps: OnceLock::new(),
            kernels: OnceLock::new(),
            back_steps: OnceLock::new(),
        })
    }

    fn steps(&self) -> Result<&[Mat]> {
        cached(&self.steps, || self.family.step_maps(&self.grid))
    }

    fn kernels(&self) -> Result<&[Mat]> {
        cached(&self.kernels, || self.grid.par_iter().map(|&t| kernel_basis(&self.proj, t)).collect())
    }

    /// `T(g_k, g_{k+1})` on `Ker P(g_{k+1})`.
    fn back_steps(&self) -> Result<&[Mat]> {
        let steps = self.steps()?;
        let kernels = self.kernels()?;
        cached(&self.back_steps, || {
            (0..steps.len())
                .into_par_iter()
                .map(|k| restricted_inverse(&steps[k], &kernels[k], self.grid[k], self.grid[k + 1]))
                .collect()
        })
    }

    /// Inverse of `T(tau, t)` restricted to `Ker P(t)`, i.e. `T(t, tau)` for `t <= tau`.
    pub fn backward(&self, t: f64, tau: f64) -> Result<Mat> {
        let forward = self.family.evaluate(tau, t)?;
        restricted_inverse(&forward, &kernel_basis(&self.proj, t)?, t, tau)
    }

    fn has_stable(&self) -> bool {
        self.proj.rank() > 0
    }

    fn has_unstable(&self) -> bool {
        self.proj.rank() < self.proj.dim()
    }

    /// Per-time state: weighted maps at every grid time on each side of `tau`.
    pub fn at(self: &Arc<Self>, tau: f64) -> Result<LyapunovAt> {
        if !(tau >= 1.0) || tau > self.params.horizon {
            return Err(Error::Domain { t: self.params.horizon, tau });
        }
        let lambda = self.params.lambda;
        let p = self.proj.at(tau)?;
        let q = Mat::identity(p.nrows(), p.ncols()) - &p;
        let g = &self.grid;
        let first_after = g.partition_point(|&s| s <= tau);
        let last_before = g.partition_point(|&s| s < tau);

        let mut forward_times = vec![tau];
        let mut forward_maps = vec![Mat::identity(p.nrows(), p.ncols())];
        if (self.has_stable() || self.params.b.is_some()) && first_after < g.len() {
            let steps = self.steps()?;
            let mut m = self.family.evaluate(g[first_after], tau)?;
            forward_times.push(g[first_after]);
            forward_maps.push(m.clone());
            for k in first_after..g.len() - 1 {
                m = &steps[k] * m;
                forward_times.push(g[k + 1]);
                forward_maps.push(m.clone());
            }
        }

        let stable = if self.has_stable() {
            let maps = forward_maps.iter().zip(&forward_times).map(|(m, &t)| m * &p * (t / tau).powf(lambda)).collect();
            Some(Term::new(TermKind::Stable, forward_times.clone(), maps))
        } else {
            None
        };
        let growth = match self.params.b {
            Some(b) if self.has_unstable() => {
                let maps = forward_maps.iter().zip(&forward_times).map(|(m, &t)| m * &q * (t / tau).powf(-b)).collect();
                Some(Term::new(TermKind::Growth, forward_times.clone(), maps))
            }
            _ => None,
        };
        let unstable = if self.has_unstable() {
            let mut times = vec![tau];
            let mut maps = vec![q.clone()];
            if last_before > 0 {
                let back = self.back_steps()?;
                let mut m = self.backward(g[last_before - 1], tau)?;
                times.push(g[last_before - 1]);
                maps.push(&m * &q * (tau / g[last_before - 1]).powf(lambda));
                for k in (0..last_before - 1).rev() {
                    m = &back[k] * m;
                    times.push(g[k]);
                    maps.push(&m * &q * (tau / g[k]).powf(lambda));
                }
            }
            Some(Term::new(TermKind::Unstable, times, maps))
        } else {
            None
        };

        if let Some(term) = &stable {
            term.check_edge(tau)?;
        }
        if let Some(term) = &growth {
            term.check_edge(tau)?;
        }
        Ok(LyapunovAt { data: Arc::clone(self), tau, p, q, stable, unstable, growth })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TermKind {
    Stable,
    Unstable,
    Growth,
}

/// One supremum `sup_t ||M(t) x||` sampled at `times` (ordered away from `tau`).
struct Term {
    kind: TermKind,
    times: Vec<f64>,
    maps: Vec<Mat>,
}

impl Term {
    fn new(kind: TermKind, times: Vec<f64>, maps: Vec<Mat>) -> Self {
        Term { kind, times, maps }
    }

    /// Rejects suprema that still increase across the last decade of the
    /// horizon: the weighted orbit has not turned over, so the truncated sup
    /// is not representative.
    fn check_edge(&self, tau: f64) -> Result<()> {
        let n = self.times.len();
        let edge = *self.times.last().expect("term has the t = tau entry");
        let start = self.times.partition_point(|&t| t < edge / 10.0);
        if n < 4 || start + 3 > n || self.times[start] <= tau {
            return Ok(());
        }
        let norms: Vec<f64> = self.maps[start..].iter().map(crate::linalg::op_norm).collect();
        let increasing = norms.windows(2).all(|w| w[1] >= w[0]);
        let first = norms[0];
        let last = *norms.last().expect("non-empty");
        if increasing && last > first * (1.0 + 1e-9) && last > 1e-300 {
            return Err(Error::UnboundedSupremum { tau, edge });
        }
        Ok(())
    }

    fn values(&self, x: &Vector) -> Vec<f64> {
        self.maps.iter().map(|m| (m * x).norm()).collect()
    }
}

/// Lyapunov norm frozen at one time.
pub(crate) struct LyapunovAt {
    data: Arc<LyapunovData>,
    tau: f64,
    p: Mat,
    q: Mat,
    stable: Option<Term>,
    unstable: Option<Term>,
    growth: Option<Term>,
}

impl LyapunovAt {
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `(stable, unstable, growth)` suprema for `x`.
    pub fn terms(&self, x: &Vector) -> Result<(f64, f64, f64)> {
        let s = match &self.stable {
            Some(term) => self.sup(term, x)?,
            None => 0.0,
        };
        let u = match &self.unstable {
            Some(term) => self.sup(term, x)?,
            None => 0.0,
        };
        let g = match &self.growth {
            Some(term) => self.sup(term, x)?,
            None => 0.0,
        };
        Ok((s, u, g))
    }

    pub fn norm(&self, x: &Vector) -> Result<f64> {
        let (s, u, g) = self.terms(x)?;
        Ok(s + u + g)
    }

    fn weighted(&self, kind: TermKind, t: f64, x: &Vector) -> Result<f64> {
        let lambda = self.data.params.lambda;
        let tau = self.tau;
        Ok(match kind {
            TermKind::Stable => (self.data.family.evaluate(t, tau)? * (&self.p * x)).norm() * (t / tau).powf(lambda),
            TermKind::Growth => {
                let b = self.data.params.b.expect("growth term implies b");
                (self.data.family.evaluate(t, tau)? * (&self.q * x)).norm() * (t / tau).powf(-b)
            }
            TermKind::Unstable => (self.data.backward(t, tau)? * (&self.q * x)).norm() * (tau / t).powf(lambda),
        })
    }

    /// Grid maximum, refined by golden-section search in `ln t` when the
    /// maximum sits strictly inside the sampled range.
    fn sup(&self, term: &Term, x: &Vector) -> Result<f64> {
        let values = term.values(x);
        let (k, best) =
            values.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        let refine = self.data.params.refine;
        if refine == 0 || k == 0 || k + 1 >= values.len() || best == 0.0 {
            return Ok(best.max(0.0));
        }
        let (mut a, mut b) = (term.times[k - 1].ln(), term.times[k + 1].ln());
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        let f = |s: f64| self.weighted(term.kind, s.exp(), x);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        let mut fc = f(c)?;
        let mut fd = f(d)?;
        let mut top = best.max(fc).max(fd);
        for _ in 0..refine {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - r * (b - a);
                fc = f(c)?;
                top = top.max(fc);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + r * (b - a);
                fd = f(d)?;
                top = top.max(fd);
            }
        }
        Ok(top)
    }
}
