use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Normalization constant of the singular-integral fractional Laplacian,
/// `s 4^s Γ(s + n/2) / (π^{n/2} Γ(1 - s))`.
pub fn normalization_constant(n: usize, s: f64) -> Result<f64> {
    check_order(s)?;
    if n == 0 {
        return Err(Error::domain("spatial dimension must be positive"));
    }
    let half_n = n as f64 / 2.0;
    Ok(s * 4f64.powf(s) * gamma(s + half_n) / (PI.powf(half_n) * gamma(1.0 - s)))
}

fn check_order(s: f64) -> Result<()> {
    if s.is_finite() && s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("fractional order s must lie in (0, 1), got {s}")))
    }
}

/// Fractional order together with its derived constants. The solver core is one-dimensional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracParams {
    s: f64,
    n: usize,
    c_ns: f64,
    theorem_range: bool,
}

impl FracParams {
    pub fn new(s: f64) -> Result<Self> {
        let n = 1;
        let c_ns = normalization_constant(n, s)?;
        let nf = n as f64;
        Ok(Self { s, n, c_ns, theorem_range: 2.0 * s < nf && nf < 4.0 * s })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn c_ns(&self) -> f64 {
        self.c_ns
    }

    /// True iff `2s < n < 4s`, the window in which the bifurcation-from-λ₁
    /// and nodal-measure results are stated. Outside it experiments are exploratory.
    pub fn theorem_range(&self) -> bool {
        self.theorem_range
    }

    /// Critical exponent `2n / (n - 2s)`; infinite when `n <= 2s`.
    pub fn critical_exponent(&self) -> f64 {
        let nf = self.n as f64;
        if nf > 2.0 * self.s {
            2.0 * nf / (nf - 2.0 * self.s)
        } else {
            f64::INFINITY
        }
    }
}
