//! Real-valued vertex functions and their norms against a graph.

use serde::{Deserialize, Serialize};

use crate::error::GraphError;
use crate::graph::WeightedGraph;

/// A vertex function `u: V -> R`, stored in the graph's vertex order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GraphFunction {
    values: Vec<f64>,
}

impl GraphFunction {
    pub fn new(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self { values: vec![0.0; n] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn check_shape(&self, g: &WeightedGraph) -> Result<(), GraphError> {
        if self.values.len() != g.len() {
            return Err(GraphError::ShapeMismatch {
                expected: g.len(),
                got: self.values.len(),
            });
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.values.iter().map(|v| s * v).collect())
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &GraphFunction) -> Self {
        Self::new(self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect())
    }

    /// `||u||_{l^p_m}` for `p >= 1`; `p = inf` gives the sup norm.
    pub fn norm_lp(&self, g: &WeightedGraph, p: f64) -> f64 {
        if p.is_infinite() {
            return self.norm_sup();
        }
        let s: f64 = g
            .mass()
            .iter()
            .zip(&self.values)
            .map(|(m, u)| m * u.abs().powf(p))
            .sum();
        s.powf(1.0 / p)
    }

    pub fn norm_sup(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `(u, v)_m`.
    pub fn inner_m(&self, g: &WeightedGraph, other: &GraphFunction) -> f64 {
        g.mass()
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(m, (a, b))| m * a * b)
            .sum()
    }

    /// `(u, v)_E`, evaluated by direct summation over edges.
    pub fn inner_energy(&self, g: &WeightedGraph, other: &GraphFunction) -> f64 {
        let (u, v) = (&self.values, &other.values);
        let mut edge = 0.0;
        for x in 0..g.len() {
            for &(y, b) in g.neighbors(x) {
                edge += b * (u[y] - u[x]) * (v[y] - v[x]);
            }
        }
        let diag: f64 = (0..g.len()).map(|x| (g.killing()[x] + g.mass()[x]) * u[x] * v[x]).sum();
        0.5 * edge + diag
    }

    /// `q(u) = 1/2 sum_{x,y} b (u(y) - u(x))^2 + sum_x m V u^2`.
    pub fn energy_form(&self, g: &WeightedGraph) -> f64 {
        self.inner_energy(g, self)
    }

    /// `||u||_E = q(u)^{1/2}`.
    pub fn norm_energy(&self, g: &WeightedGraph) -> f64 {
        self.energy_form(g).sqrt()
    }
}

impl From<Vec<f64>> for GraphFunction {
    fn from(values: Vec<f64>) -> Self {
        Self::new(values)
    }
}
