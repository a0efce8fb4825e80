//! Time grids on `[1, t_max]` and sample sets of time pairs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{random_unit_vectors, Vector};

/// `n` points log-spaced on `[a, b]`, endpoints included.
pub fn log_spaced(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let (la, lb) = (a.ln(), b.ln());
            (0..n).map(|i| if i == n - 1 { b } else { (la + (lb - la) * i as f64 / (n - 1) as f64).exp() }).collect()
        }
    }
}

/// Nodes for grid functions: log-spaced with `density` points per decade
/// until the log step exceeds `1/m` (`m = ceil(density / 16)`), uniform with
/// step `1/m` afterwards. Every integer in range is a node, so unit windows
/// and the jump times of discrete families are resolved. Doubling the density
/// halves every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    density: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, density: usize) -> Result<Self> {
        if !(t_max > 1.0) || !t_max.is_finite() {
            return Err(Error::invalid(format!("t_max must be finite and > 1, got {t_max}")));
        }
        if density == 0 {
            return Err(Error::invalid("density must be positive"));
        }
        let ratio = 10f64.powf(1.0 / density as f64);
        // at least four steps per unit so every unit window holds four nodes
        let m = density.div_ceil(16).max(4) as f64;
        let h_max = 1.0 / m;
        let snap = 1e-9;
        let mut nodes = vec![1.0];
        let mut t = 1.0f64;
        loop {
            let log_next = t * ratio;
            let next = if log_next - t >= h_max {
                ((t * m + snap).floor() + 1.0) / m
            } else {
                let int_next = (t + snap).floor() + 1.0;
                if int_next < log_next - snap {
                    int_next
                } else {
                    log_next
                }
            };
            if next >= t_max - snap * t_max.max(1.0) {
                nodes.push(t_max);
                break;
            }
            nodes.push(next);
            t = next;
        }
        Ok(TimeGrid { nodes, density })
    }

    /// Wraps arbitrary strictly increasing nodes starting at 1.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::invalid("a grid needs at least two nodes"));
        }
        if (nodes[0] - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("grid must start at 1, starts at {}", nodes[0])));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("grid nodes must be finite and strictly increasing"));
        }
        Ok(TimeGrid { nodes, density: 0 })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn t_max(&self) -> f64 {
        *self.nodes.last().expect("grid is never empty")
    }

    /// Points per decade used to build the grid, `0` for user-supplied nodes.
    pub fn density(&self) -> usize {
        self.density
    }

    /// Index of the node closest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        match self.nodes.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i >= self.nodes.len() => self.nodes.len() - 1,
            Err(i) => {
                if t - self.nodes[i - 1] <= self.nodes[i] - t {
                    i - 1
                } else {
                    i
                }
            }
        }
    }
}

/// Sampling parameters for envelope fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub t_max: f64,
    /// log-spaced initial times in `[1, t_max / max_ratio]`
    pub base_points: usize,
    /// log-spaced ratios in `[1, max_ratio]`
    pub ratio_points: usize,
    pub max_ratio: f64,
    /// random unit probe vectors shared by every pair
    pub vectors: usize,
    pub seed: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig { t_max: 1000.0, base_points: 24, ratio_points: 24, max_ratio: 100.0, vectors: 8, seed: 0 }
    }
}

impl SampleConfig {
    pub fn with_t_max(t_max: f64) -> Self {
        SampleConfig { t_max, ..Default::default() }
    }
}

/// Time pairs `(early, late)` with `1 <= early <= late <= t_max`, plus the
/// probe vectors applied at every pair.
#[derive(Debug, Clone)]
pub struct SamplePairs {
    pub pairs: Vec<(f64, f64)>,
    pub vectors: Vec<Vector>,
}

impl SamplePairs {
    /// Default log/log pair set. `breakpoints` (jump times of a piecewise
    /// family) add one pair straddling each jump, since log-spaced ratios
    /// cannot resolve unit-scale structure at late times.
    pub fn new(config: &SampleConfig, dim: usize, breakpoints: &[f64]) -> Self {
        let base_hi = (config.t_max / config.max_ratio).max(1.0);
        let bases = log_spaced(1.0, base_hi, config.base_points.max(1));
        let ratios = log_spaced(1.0, config.max_ratio, config.ratio_points.max(1));
        let mut pairs = Vec::with_capacity(bases.len() * ratios.len());
        for &s in &bases {
            for &q in &ratios {
                let t = (s * q).min(config.t_max);
                pairs.push((s, t));
            }
        }
        for w in breakpoints.windows(3) {
            let early = 0.5 * (w[0] + w[1]);
            let late = 0.5 * (w[1] + w[2]);
            if late <= config.t_max {
                pairs.push((early, late));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        pairs.dedup();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let vectors = random_unit_vectors(dim, config.vectors, &mut rng);
        SamplePairs { pairs, vectors }
    }

    /// Explicit pairs and probes.
    pub fn from_parts(pairs: Vec<(f64, f64)>, vectors: Vec<Vector>) -> Self {
        SamplePairs { pairs, vectors }
    }

    /// Union with another sample set (probe vectors are concatenated).
    pub fn extended(&self, other: &SamplePairs) -> SamplePairs {
        let mut pairs = self.pairs.clone();
        pairs.extend_from_slice(&other.pairs);
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        pairs.dedup();
        let mut vectors = self.vectors.clone();
        vectors.extend(other.vectors.iter().cloned());
        SamplePairs { pairs, vectors }
    }
}
