//! Elementary and discrete fractional Picone inequalities.
//!
//! For a symmetric `S` with nonpositive off-diagonals,
//! `uᵀSu - vᵀS(u²/v) = Σ_{i<j} (-S_ij) [(u_i - u_j)² - (v_i - v_j)(u_i²/v_i - u_j²/v_j)]`
//! because the row-sum (tail) terms contribute `Σ r_i u_i²` to both sides.
//! Every bracket is nonnegative by the elementary inequality.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::operator::{OperatorKind, OperatorPair};
use crate::spectrum::Spectrum;

/// Relative slack tolerance for the discrete inequality.
pub const PICONE_TOL: f64 = 1e-10;
/// Absolute-plus-relative tolerance for the elementary inequality.
pub const ELEMENTARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElementaryCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `(c - d)(a²/c - b²/d) ≤ (a - b)²` for `c, d > 0`.
pub fn elementary_inequality_check(a: f64, b: f64, c: f64, d: f64) -> Result<ElementaryCheck> {
    if !(c > 0.0 && d > 0.0) {
        return Err(Error::domain(format!("elementary inequality needs c, d > 0 (got c = {c}, d = {d})")));
    }
    let lhs = (c - d) * (a * a / c - b * b / d);
    let rhs = (a - b) * (a - b);
    Ok(ElementaryCheck { lhs, rhs, holds: lhs <= rhs + ELEMENTARY_TOL * (1.0 + rhs.abs()) })
}

/// Test pair `(u, v)` with the shift `eps` applied to `v`.
#[derive(Debug, Clone)]
pub struct PiconePair {
    pub u: DVector<f64>,
    pub v: DVector<f64>,
    pub eps: f64,
}

impl PiconePair {
    pub fn new(u: DVector<f64>, v: DVector<f64>, eps: f64) -> Result<Self> {
        Error::check_len(u.len(), v.len())?;
        if !(eps >= 0.0) {
            return Err(Error::domain(format!("shift must be nonnegative (got {eps})")));
        }
        if let Some(i) = v.iter().position(|vi| !(vi + eps > 0.0)) {
            return Err(Error::domain(format!("v + eps is not positive at node {i} ({})", v[i] + eps)));
        }
        Ok(Self { u, v, eps })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiconeValue {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl PiconeValue {
    pub fn holds(&self) -> bool {
        self.slack >= -PICONE_TOL * (1.0 + self.rhs.abs())
    }
}

/// `lhs = (v + eps)ᵀ S (u²/(v + eps))`, `rhs = uᵀSu`, `slack = rhs - lhs`.
pub fn discrete_picone(pair: &OperatorPair, p: &PiconePair) -> Result<PiconeValue> {
    if pair.kind() != OperatorKind::Restricted {
        return Err(Error::UnsupportedKind("discrete Picone inequality needs the restricted operator"));
    }
    Error::check_len(pair.dim(), p.u.len())?;
    let shifted = p.v.add_scalar(p.eps);
    if let Some(i) = shifted.iter().position(|vi| !(*vi > 0.0)) {
        return Err(Error::domain(format!("v + eps is not positive at node {i}")));
    }
    let w = DVector::from_fn(p.u.len(), |i, _| p.u[i] * p.u[i] / shifted[i]);
    let lhs = pair.energy(&shifted, &w)?;
    let rhs = pair.energy(&p.u, &p.u)?;
    Ok(PiconeValue { lhs, rhs, slack: rhs - lhs })
}

/// Summary of a randomized property run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropertySummary {
    pub trials: usize,
    pub failures: usize,
    /// Smallest normalized slack `slack / (1 + |rhs|)` seen.
    pub worst_slack: f64,
}

impl PropertySummary {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    fn collect(trials: usize, slacks: Vec<(f64, bool)>) -> Self {
        Self {
            trials,
            failures: slacks.iter().filter(|(_, ok)| !ok).count(),
            worst_slack: slacks.iter().map(|(s, _)| *s).fold(f64::INFINITY, f64::min),
        }
    }
}

/// Random pairs `u ~ U(-1, 1)^N`, `v ~ U(0.1, 1)^N`; trial `t` uses seed `seed + t`.
pub fn picone_property_run(pair: &OperatorPair, trials: usize, seed: u64, exec: Execution) -> Result<PropertySummary> {
    if pair.kind() != OperatorKind::Restricted {
        return Err(Error::UnsupportedKind("discrete Picone inequality needs the restricted operator"));
    }
    let n = pair.dim();
    let results = exec.map(trials, |t| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
        let u = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let v = DVector::from_fn(n, |_, _| rng.random_range(0.1..1.0));
        let p = PiconePair { u, v, eps: 0.0 };
        discrete_picone(pair, &p).map(|val| (val.slack / (1.0 + val.rhs.abs()), val.holds()))
    });
    let slacks = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(PropertySummary::collect(trials, slacks))
}

/// Random tuples with `c, d` log-uniform on `(1e-6, 1e6)` and `a, b` of
/// random sign and log-uniform magnitude on `(1e-3, 1e3)`. Each worker
/// handles a block of `BLOCK` tuples from its own stream.
pub fn elementary_property_run(trials: usize, seed: u64, exec: Execution) -> PropertySummary {
    const BLOCK: usize = 4096;
    let blocks = trials.div_ceil(BLOCK);
    let per_block = exec.map(blocks, |blk| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(blk as u64));
        let count = BLOCK.min(trials - blk * BLOCK);
        let mut failures = 0;
        let mut worst = f64::INFINITY;
        let signed = |rng: &mut ChaCha8Rng| {
            let m = 10f64.powf(rng.random_range(-3.0..3.0));
            if rng.random::<bool>() { m } else { -m }
        };
        for _ in 0..count {
            let a = signed(&mut rng);
            let b = signed(&mut rng);
            let c = 10f64.powf(rng.random_range(-6.0..6.0));
            let d = 10f64.powf(rng.random_range(-6.0..6.0));
            let chk = elementary_inequality_check(a, b, c, d).expect("positive by construction");
            worst = worst.min((chk.rhs - chk.lhs) / (1.0 + chk.rhs.abs()));
            failures += usize::from(!chk.holds);
        }
        (failures, worst)
    });
    PropertySummary {
        trials,
        failures: per_block.iter().map(|(f, _)| f).sum(),
        worst_slack: per_block.iter().map(|(_, w)| *w).fold(f64::INFINITY, f64::min),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectEntry {
    /// Shift relative to `max|φ₂|`.
    pub eps: f64,
    /// `E(φ₁, φ₁) - E(v, φ₁²/v)` with `v = |φ₂| + eps`.
    pub defect: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContradictionReport {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Value of `Σ h φ₁² (λ₁ - λ₂)` that a one-signed second eigenfunction would force.
    pub eigen_side: f64,
    /// Empty for the spectral operator, which has no Picone inequality.
    pub defects: Vec<DefectEntry>,
    pub contradiction: bool,
}

pub const DEMO_SHIFTS: [f64; 3] = [1e-2, 1e-4, 1e-6];

/// If `φ₂` were one-signed, testing its equation with `φ₁²/(φ₂ + ε)` would make
/// the Picone defect equal `(λ₁ - λ₂)∫φ₁² < 0` in the limit, while Picone keeps it
/// nonnegative. The report exhibits both sides.
pub fn isolatedness_contradiction_demo(pair: &OperatorPair, spectrum: &Spectrum) -> Result<ContradictionReport> {
    if spectrum.len() < 2 {
        return Err(Error::Rank { requested: 2, available: spectrum.len() });
    }
    let (l1, l2) = (spectrum.eigenvalue(1), spectrum.eigenvalue(2));
    let phi1 = spectrum.eigenvector(1);
    let eigen_side = pair.mass(phi1, phi1)? * (l1 - l2);
    let defects = if pair.kind() == OperatorKind::Restricted {
        picone_defects(pair, phi1, &spectrum.eigenvector(2).abs(), &DEMO_SHIFTS)?
    } else {
        Vec::new()
    };
    let picone_side_ok = defects.is_empty() || defects.iter().all(|d| d.holds);
    Ok(ContradictionReport {
        lambda1: l1,
        lambda2: l2,
        eigen_side,
        contradiction: picone_side_ok && eigen_side < 0.0,
        defects,
    })
}

/// Picone defects `E(u, u) - E(v + eps, u²/(v + eps))` for shifts relative to `max v`.
pub fn picone_defects(pair: &OperatorPair, u: &DVector<f64>, v: &DVector<f64>, shifts: &[f64]) -> Result<Vec<DefectEntry>> {
    let scale = v.amax();
    shifts
        .iter()
        .map(|&eps| {
            let p = PiconePair::new(u.clone(), v.clone(), eps * scale)?;
            let val = discrete_picone(pair, &p)?;
            Ok(DefectEntry { eps, defect: val.slack, holds: val.holds() })
        })
        .collect()
}
