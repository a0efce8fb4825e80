use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::linalg::Vector;
use crate::norms::NormFamily;
use crate::quadrature::cumulative_trapezoid;

/// Piecewise linear function `[1, t_max] -> R^d` given by its node values.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    nodes: Vec<f64>,
    values: Vec<Vector>,
}

impl GridFunction {
    pub fn new(nodes: Vec<f64>, values: Vec<Vector>) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != values.len() {
            return Err(Error::invalid(format!(
                "grid function needs matching nodes and values (at least two), got {} and {}",
                nodes.len(),
                values.len()
            )));
        }
        if nodes[0] != 1.0 {
            return Err(Error::invalid(format!("grid function must start at t = 1, got {}", nodes[0])));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || !nodes.iter().all(|t| t.is_finite()) {
            return Err(Error::invalid("grid function nodes must be finite and strictly increasing"));
        }
        let d = values[0].len();
        if let Some(v) = values.iter().find(|v| v.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: v.len() });
        }
        if values.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::invalid("grid function values must be finite"));
        }
        Ok(GridFunction { nodes, values })
    }

    pub fn from_fn<F: Fn(f64) -> Vector>(grid: &TimeGrid, f: F) -> Result<Self> {
        let nodes = grid.nodes().to_vec();
        let values = nodes.iter().map(|&t| f(t)).collect();
        Self::new(nodes, values)
    }

    pub fn zeros(grid: &TimeGrid, dim: usize) -> Self {
        let nodes = grid.nodes().to_vec();
        let values = vec![Vector::zeros(dim); nodes.len()];
        GridFunction { nodes, values }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[Vector] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn t_max(&self) -> f64 {
        *self.nodes.last().expect("at least two nodes")
    }

    /// Linear interpolation; constant extrapolation outside the nodes.
    pub fn eval(&self, t: f64) -> Vector {
        let n = self.nodes.len();
        if t <= self.nodes[0] {
            return self.values[0].clone();
        }
        if t >= self.nodes[n - 1] {
            return self.values[n - 1].clone();
        }
        let k = self.nodes.partition_point(|&s| s <= t) - 1;
        let (a, b) = (self.nodes[k], self.nodes[k + 1]);
        let w = (t - a) / (b - a);
        &self.values[k] * (1.0 - w) + &self.values[k + 1] * w
    }

    fn same_nodes(&self, other: &GridFunction) -> Result<()> {
        if self.nodes != other.nodes {
            return Err(Error::invalid("grid functions live on different grids"));
        }
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }

    /// `a self + b other` on a shared grid.
    pub fn combine(&self, a: f64, other: &GridFunction, b: f64) -> Result<GridFunction> {
        self.same_nodes(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| x * a + y * b).collect();
        Ok(GridFunction { nodes: self.nodes.clone(), values })
    }

    pub fn scaled(&self, a: f64) -> GridFunction {
        GridFunction { nodes: self.nodes.clone(), values: self.values.iter().map(|v| v * a).collect() }
    }

    /// Largest Euclidean distance between node values.
    pub fn max_difference(&self, other: &GridFunction) -> Result<f64> {
        self.same_nodes(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max))
    }

    /// Largest Euclidean node value.
    pub fn max_euclidean(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `t, v1, ..., vd` with a header row.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim()).map(|i| format!("v{i}")));
        wtr.write_record(&header)?;
        for (t, v) in self.nodes.iter().zip(&self.values) {
            let mut row = vec![t.to_string()];
            row.extend(v.iter().map(|x| x.to_string()));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(r);
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let nums: Vec<f64> = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::invalid(format!("bad number `{s}`: {e}"))))
                .collect::<Result<_>>()?;
            if nums.len() < 2 {
                return Err(Error::invalid("grid function rows need t and at least one component"));
            }
            nodes.push(nums[0]);
            values.push(Vector::from_row_slice(&nums[1..]));
        }
        Self::new(nodes, values)
    }
}

/// `sup_t ||x(t)||_t` over the nodes.
pub fn sup_norm(x: &GridFunction, norms: &NormFamily) -> Result<f64> {
    node_norms(x, norms).map(|v| v.into_iter().fold(0.0, f64::max))
}

pub(crate) fn node_norms(x: &GridFunction, norms: &NormFamily) -> Result<Vec<f64>> {
    if norms.dim() != x.dim() {
        return Err(Error::DimensionMismatch { expected: norms.dim(), found: x.dim() });
    }
    x.nodes.par_iter().zip(&x.values).map(|(&t, v)| norms.norm(t, v)).collect()
}

/// `sup_t int_t^{t+1} ||y(s)||_s ds`, windows starting at every node with
/// `t + 1 <= t_max`. `s -> ||y(s)||_s` is interpolated linearly between nodes.
pub fn sliding_l1_norm(y: &GridFunction, norms: &NormFamily) -> Result<f64> {
    let g = node_norms(y, norms)?;
    sliding_l1_from_values(&y.nodes, &g)
}

pub(crate) fn sliding_l1_from_values(nodes: &[f64], g: &[f64]) -> Result<f64> {
    let t_max = *nodes.last().expect("non-empty");
    if t_max < 2.0 - 1e-12 {
        return Err(Error::invalid(format!("no unit window fits in [1, {t_max}]")));
    }
    let cum = cumulative_trapezoid(nodes, g);
    let mut best = 0.0f64;
    for i in 0..nodes.len() {
        let end = nodes[i] + 1.0;
        if end > t_max * (1.0 + 1e-12) {
            break;
        }
        let end = end.min(t_max);
        // last node <= end, tolerant to rounding of integer nodes
        let mut j = nodes.partition_point(|&s| s <= end * (1.0 + 1e-13)) - 1;
        j = j.max(i);
        let mut integral = cum[j] - cum[i];
        let mut points = j - i + 1;
        if nodes[j] < end * (1.0 - 1e-13) && j + 1 < nodes.len() {
            let (a, b) = (nodes[j], nodes[j + 1]);
            let w = (end - a) / (b - a);
            let ge = g[j] * (1.0 - w) + g[j + 1] * w;
            integral += 0.5 * (end - a) * (g[j] + ge);
            points += 1;
        }
        if points < 4 {
            return Err(Error::WindowCoverage { start: nodes[i], end, points });
        }
        best = best.max(integral);
    }
    Ok(best)
}
