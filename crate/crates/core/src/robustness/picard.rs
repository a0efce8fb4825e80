//! Picard iteration for `U(t,tau) = T(t,tau) + int_tau^t T(t,s) B(s) U(s,tau) ds`.
//!
//! The solution is built panel by panel between the checkpoints
//! `r^k`: on each panel `U(., a)` is represented by its values at Chebyshev
//! nodes and the integral by Gauss-Legendre rules on `[a, s]`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{EvolutionFamily, MatFn, Propagator};
use crate::linalg::Mat;
use crate::quadrature::{ChebyshevInterpolant, GaussLegendre};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardSettings {
    /// Chebyshev nodes per panel
    pub nodes: usize,
    /// Gauss-Legendre points per integral
    pub quadrature: usize,
    pub tol: f64,
    pub max_iterations: usize,
    /// ratio `b / a` of consecutive panel checkpoints
    pub panel_ratio: f64,
}

impl Default for PicardSettings {
    fn default() -> Self {
        PicardSettings { nodes: 16, quadrature: 16, tol: 1e-10, max_iterations: 200, panel_ratio: 2f64.powf(0.25) }
    }
}

struct Panel {
    interp: ChebyshevInterpolant,
    /// `U(s_j, a)` at the Chebyshev nodes
    values: Vec<Mat>,
    /// `U(b, a)`
    end: Mat,
}

impl Panel {
    fn at(&self, t: f64) -> Mat {
        let beta = self.interp.basis(t);
        let d = self.end.nrows();
        let mut out = Mat::zeros(d, d);
        for (w, v) in beta.iter().zip(&self.values) {
            out += v * *w;
        }
        out
    }
}

pub(crate) struct PicardPropagator {
    base: EvolutionFamily,
    b: MatFn,
    settings: PicardSettings,
    rule: GaussLegendre,
    panels: Mutex<HashMap<i64, Arc<Panel>>>,
}

impl PicardPropagator {
    pub fn new(base: EvolutionFamily, b: MatFn, settings: PicardSettings) -> Result<Self> {
        if base.has_jumps() {
            return Err(Error::invalid("the Picard route needs a continuous family"));
        }
        if !(settings.panel_ratio > 1.0) || settings.nodes < 2 || settings.quadrature < 2 {
            return Err(Error::invalid("Picard settings need panel_ratio > 1 and at least two nodes"));
        }
        let rule = GaussLegendre::new(settings.quadrature);
        Ok(PicardPropagator { base, b, settings, rule, panels: Mutex::new(HashMap::new()) })
    }

    fn checkpoint(&self, k: i64) -> f64 {
        self.settings.panel_ratio.powi(k as i32)
    }

    /// Largest `k` with `checkpoint(k) <= t`.
    fn index_before(&self, t: f64) -> i64 {
        let mut k = (t.ln() / self.settings.panel_ratio.ln()).floor() as i64;
        while self.checkpoint(k) > t {
            k -= 1;
        }
        while self.checkpoint(k + 1) <= t {
            k += 1;
        }
        k
    }

    fn solve(&self, a: f64, b: f64) -> Result<Panel> {
        let d = self.base.dim();
        let m = self.settings.nodes;
        let interp = ChebyshevInterpolant::new(a, b, m);
        let mut targets = interp.nodes.clone();
        targets.push(b);
        // U(s) = T(s, a) + sum_j G[s][j] U(s_j)
        let mut free = Vec::with_capacity(targets.len());
        let mut gain: Vec<Vec<Mat>> = Vec::with_capacity(targets.len());
        for &s in &targets {
            free.push(self.base.evaluate(s, a)?);
            let mut g = vec![Mat::zeros(d, d); m];
            for (r, w) in self.rule.mapped(a, s) {
                let k = self.base.evaluate(s, r)? * (self.b)(r) * w;
                for (gj, beta) in g.iter_mut().zip(interp.basis(r)) {
                    *gj += &k * beta;
                }
            }
            gain.push(g);
        }
        let mut values: Vec<Mat> = free[..m].to_vec();
        let mut last_update = f64::INFINITY;
        let mut converged = false;
        for _ in 0..self.settings.max_iterations {
            let next: Vec<Mat> = (0..m)
                .map(|i| {
                    let mut u = free[i].clone();
                    for (g, v) in gain[i].iter().zip(&values) {
                        u += g * v;
                    }
                    u
                })
                .collect();
            let scale = next.iter().map(|u| u.amax()).fold(1.0, f64::max);
            last_update = next.iter().zip(&values).map(|(u, v)| (u - v).amax()).fold(0.0, f64::max) / scale;
            values = next;
            if last_update < self.settings.tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::PicardNonConvergence { iterations: self.settings.max_iterations, last_update });
        }
        let mut end = free[m].clone();
        for (g, v) in gain[m].iter().zip(&values) {
            end += g * v;
        }
        Ok(Panel { interp, values, end })
    }

    fn panel(&self, k: i64) -> Result<Arc<Panel>> {
        if let Some(p) = self.panels.lock().expect("panel cache poisoned").get(&k) {
            return Ok(Arc::clone(p));
        }
        let p = Arc::new(self.solve(self.checkpoint(k), self.checkpoint(k + 1))?);
        self.panels.lock().expect("panel cache poisoned").entry(k).or_insert_with(|| Arc::clone(&p));
        Ok(p)
    }
}

impl Propagator for PicardPropagator {
    fn propagate(&self, t: f64, tau: f64) -> Result<Mat> {
        let i = self.index_before(tau);
        let j = self.index_before(t);
        if i == j {
            if tau == self.checkpoint(i) {
                return Ok(self.panel(i)?.at(t));
            }
            return Ok(self.solve(tau, t)?.end);
        }
        let mut u = if tau == self.checkpoint(i) {
            self.panel(i)?.end.clone()
        } else {
            self.solve(tau, self.checkpoint(i + 1))?.end
        };
        for k in i + 1..j {
            u = &self.panel(k)?.end * u;
        }
        if t > self.checkpoint(j) {
            u = self.panel(j)?.at(t) * u;
        }
        Ok(u)
    }
}
