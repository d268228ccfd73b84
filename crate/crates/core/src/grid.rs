use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform interior grid on `(a, b)`.
///
/// Only the `n` interior nodes `x_i = a + i h`, `i = 1..=n`, carry unknowns;
/// every function on the grid is taken to vanish identically outside `(a, b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    a: f64,
    b: f64,
    n: usize,
    h: f64,
    nodes: Vec<f64>,
}

impl Grid1D {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::domain(format!("interval endpoints must satisfy a < b, got ({a}, {b})")));
        }
        if n < 2 {
            return Err(Error::domain(format!("need at least 2 interior nodes, got {n}")));
        }
        let h = (b - a) / (n as f64 + 1.0);
        let nodes = (1..=n).map(|i| a + i as f64 * h).collect();
        Ok(Self { a, b, n, h, nodes })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    /// Samples `f` at the interior nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }
}
