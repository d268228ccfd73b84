//! Generalized eigenproblem `S φ = λ T φ` and the qualitative spectral checks
//! built on it: Rayleigh quotients, isolatedness of `λ₁` under refinement,
//! nodal domains and the index of the trivial branch.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::operator::{OperatorKind, OperatorPair};

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;
/// Accepted relative residual `‖Sφ - λTφ‖∞ / (‖S‖∞ ‖φ‖∞)` of a returned pair.
const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    /// `φᵀ T φ = 1`.
    MassUnit,
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: f64,
    pub phi: DVector<f64>,
}

/// The `K` smallest eigenpairs of a pencil, in ascending order.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pairs: Vec<EigenPair>,
    normalization: Normalization,
    kind: OperatorKind,
    residual: f64,
}

impl Spectrum {
    pub fn pairs(&self) -> &[EigenPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `λ_k`, 1-based.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        self.pairs[k - 1].lambda
    }

    /// `φ_k`, 1-based.
    pub fn eigenvector(&self, k: usize) -> &DVector<f64> {
        &self.pairs[k - 1].phi
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.lambda).collect()
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    /// Largest relative residual over the returned pairs.
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

/// Computes the `k` smallest generalized eigenpairs.
///
/// `φ₁` is signed positive at node `⌈N/2⌉`; higher modes are signed so that
/// their first entry above `1e-3 max|φ|` is positive.
pub fn solve_spectrum(pair: &OperatorPair, k: usize) -> Result<Spectrum> {
    let n = pair.dim();
    if k == 0 || k > n {
        return Err(Error::Rank { requested: k, available: n });
    }
    let scale: Vec<f64> = pair.mass_diag().iter().map(|t| 1.0 / t.sqrt()).collect();
    let s = pair.stiffness();
    let reduced = DMatrix::from_fn(n, n, |i, j| s[(i, j)] * scale[i] * scale[j]);
    let eig = SymmetricEigen::try_new(reduced, EIGEN_EPS, EIGEN_MAX_ITER).ok_or_else(|| {
        Error::numerical(format!("symmetric eigensolver did not converge in {EIGEN_MAX_ITER} sweeps (N = {n})"))
    })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let s_norm = s.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut pairs = Vec::with_capacity(k);
    let mut residual: f64 = 0.0;
    for (rank, &idx) in order.iter().take(k).enumerate() {
        let lambda = eig.eigenvalues[idx];
        let mut phi = DVector::from_fn(n, |i, _| eig.eigenvectors[(i, idx)] * scale[i]);
        let peak = phi.amax();
        let pivot = if rank == 0 {
            phi[n.div_ceil(2) - 1]
        } else {
            phi.iter().copied().find(|v| v.abs() > 1e-3 * peak).unwrap_or(0.0)
        };
        if pivot < 0.0 {
            phi.neg_mut();
        }
        let r = s * &phi - pair.apply_mass(&phi) * lambda;
        residual = residual.max(r.amax() / (s_norm * peak));
        pairs.push(EigenPair { lambda, phi });
    }
    if !(residual <= RESIDUAL_TOL) {
        return Err(Error::numerical(format!("eigenpair residual {residual:.3e} exceeds {RESIDUAL_TOL:.0e}")));
    }
    Ok(Spectrum { pairs, normalization: Normalization::MassUnit, kind: pair.kind(), residual })
}

/// Discrete Rayleigh quotient `uᵀSu / uᵀTu`.
pub fn rayleigh(pair: &OperatorPair, u: &DVector<f64>) -> Result<f64> {
    let den = pair.mass(u, u)?;
    if den <= 0.0 {
        return Err(Error::domain("Rayleigh quotient of the zero vector"));
    }
    Ok(pair.energy(u, u)? / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateStatus {
    Certified,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapLevel {
    pub n: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub gap: f64,
    /// Eigenvalues in `(λ₁, λ₁ + δ̂/2)` at this level, when `δ̂` is known.
    pub spurious: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IsolatednessReport {
    pub kind: OperatorKind,
    pub s: f64,
    pub levels: Vec<GapLevel>,
    /// Extrapolated limit `δ̂` of `λ₂ - λ₁`.
    pub extrapolated_gap: Option<f64>,
    /// Ratio of successive gap increments used for the extrapolation.
    pub contraction: Option<f64>,
    /// `(λ₁, λ₁ + δ̂/2)` at the finest level.
    pub certified_interval: Option<(f64, f64)>,
    pub status: CertificateStatus,
    pub reason: Option<String>,
}

/// Increments below this fraction of the gap are treated as converged.
const STAGNATION: f64 = 1e-10;

/// Tracks `λ₂ - λ₁` over refinements of `pair` and certifies that no
/// eigenvalue enters `(λ₁, λ₁ + δ̂/2)` at any level.
pub fn isolatedness_certificate(pair: &OperatorPair, refinements: &[usize]) -> Result<IsolatednessReport> {
    let mut levels = Vec::with_capacity(refinements.len());
    let mut pencils = Vec::with_capacity(refinements.len());
    for &n in refinements {
        let refined = if n == pair.dim() { pair.clone() } else { pair.rebuild(n)? };
        let pencil = refined.pencil().clone();
        let l1 = pencil.eigenvalue(1).ok_or_else(|| Error::numerical("empty pencil"))?;
        let l2 = pencil.eigenvalue(2).ok_or_else(|| Error::numerical("pencil has a single eigenvalue"))?;
        levels.push(GapLevel { n, lambda1: l1, lambda2: l2, gap: l2 - l1, spurious: None });
        pencils.push(pencil);
    }
    let mut report = IsolatednessReport {
        kind: pair.kind(),
        s: pair.params().s(),
        levels,
        extrapolated_gap: None,
        contraction: None,
        certified_interval: None,
        status: CertificateStatus::Inconclusive,
        reason: None,
    };
    if report.levels.len() < 2 {
        report.reason = Some("at least two refinement levels are needed".into());
        return Ok(report);
    }

    let gaps: Vec<f64> = report.levels.iter().map(|l| l.gap).collect();
    let min_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let diffs: Vec<f64> = gaps
        .windows(2)
        .map(|w| if (w[1] - w[0]).abs() <= STAGNATION * w[1].abs() { 0.0 } else { w[1] - w[0] })
        .collect();
    let signs: Vec<f64> = diffs.iter().filter(|d| **d != 0.0).map(|d| d.signum()).collect();
    let last = *gaps.last().unwrap();

    let (delta, reason) = if signs.is_empty() {
        (last, None)
    } else if signs.iter().any(|s| *s != signs[0]) {
        (min_gap, Some("gap is non-monotone under refinement".to_string()))
    } else if diffs.len() < 2 {
        (min_gap, None)
    } else {
        let d1 = diffs[diffs.len() - 2];
        let d2 = diffs[diffs.len() - 1];
        let ratio = if d1 != 0.0 { d2 / d1 } else { 0.0 };
        report.contraction = Some(ratio);
        if (0.0..1.0).contains(&ratio) {
            (last + d2 * ratio / (1.0 - ratio), None)
        } else {
            (min_gap, Some(format!("increments do not contract (ratio {ratio:.3})")))
        }
    };
    if !(delta > 0.0) {
        report.reason = Some(format!("extrapolated gap {delta:.3e} is not positive"));
        return Ok(report);
    }
    report.extrapolated_gap = Some(delta);

    let mut clean = true;
    for (level, pencil) in report.levels.iter_mut().zip(&pencils) {
        let tol = 1e-9 * level.lambda1.max(1.0);
        let inside = pencil.count_below(level.lambda1 + 0.5 * delta) - pencil.count_below(level.lambda1 + tol);
        level.spurious = Some(inside);
        clean &= inside == 0;
    }
    let finest = report.levels.last().unwrap().lambda1;
    report.certified_interval = Some((finest, finest + 0.5 * delta));
    match (clean, reason) {
        (true, None) => report.status = CertificateStatus::Certified,
        (true, Some(r)) => report.reason = Some(r),
        (false, _) => report.reason = Some("an eigenvalue enters the certified interval".into()),
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodalDomain {
    pub start: f64,
    pub end: f64,
    pub sign: i8,
}

impl NodalDomain {
    pub fn measure(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodalReport {
    pub k: usize,
    pub lambda: f64,
    pub domains: Vec<NodalDomain>,
    pub min_measure: f64,
    /// `min_measure · λ_k^{1/(2s)}`.
    pub bound_product: f64,
    /// Set when `s` lies outside `1/4 < s < 1/2`.
    pub exploratory: bool,
}

/// Relative size below which a nodal value counts as zero.
const NODAL_ZERO: f64 = 1e-10;

/// Nodal domains of `φ_k` (1-based `k`), with sign changes located by linear
/// interpolation between adjacent nodes. Runs of zero values are split at their midpoint.
pub fn nodal_analysis(spectrum: &Spectrum, grid: &Grid1D, k: usize, s: f64) -> Result<NodalReport> {
    if k == 0 || k > spectrum.len() {
        return Err(Error::Rank { requested: k, available: spectrum.len() });
    }
    let phi = spectrum.eigenvector(k);
    Error::check_len(grid.len(), phi.len())?;
    let peak = phi.amax();
    if !(peak > 0.0) {
        return Err(Error::numerical(format!("eigenvector {k} vanishes identically")));
    }
    let x = grid.nodes();
    let signed: Vec<(usize, f64)> =
        phi.iter().enumerate().filter(|(_, v)| v.abs() > NODAL_ZERO * peak).map(|(i, v)| (i, *v)).collect();

    let mut domains = Vec::new();
    let mut start = grid.a();
    for w in signed.windows(2) {
        let ((i, vi), (j, vj)) = (w[0], w[1]);
        if vi.signum() == vj.signum() {
            continue;
        }
        let cross = if j == i + 1 { x[i] + (x[j] - x[i]) * vi / (vi - vj) } else { 0.5 * (x[i] + x[j]) };
        domains.push(NodalDomain { start, end: cross, sign: vi.signum() as i8 });
        start = cross;
    }
    let last_sign = signed.last().map(|(_, v)| v.signum() as i8).unwrap_or(1);
    domains.push(NodalDomain { start, end: grid.b(), sign: last_sign });

    let min_measure = domains.iter().map(NodalDomain::measure).fold(f64::INFINITY, f64::min);
    let lambda = spectrum.eigenvalue(k);
    Ok(NodalReport {
        k,
        lambda,
        min_measure,
        bound_product: min_measure * lambda.powf(1.0 / (2.0 * s)),
        exploratory: !(0.25 < s && s < 0.5),
        domains,
    })
}

/// Relative tolerance under which `λ` is taken to coincide with an eigenvalue.
pub const INDEX_TOL: f64 = 1e-9;

/// Sign of `det(S - λT)`: `(-1)^m` with `m = #{k : λ_k < λ}`, or 0 when `λ`
/// is within `INDEX_TOL · max(1, λ)` of an eigenvalue.
pub fn trivial_branch_index(pair: &OperatorPair, lambda: f64) -> i32 {
    pair.pencil().inertia(lambda, INDEX_TOL * lambda.abs().max(1.0)).det_sign()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub kind: OperatorKind,
    pub s: f64,
    /// `(N, λ₁)` per level.
    pub levels: Vec<(usize, f64)>,
    /// Observed order from the three finest levels, assuming a constant refinement ratio.
    pub order: Option<f64>,
    /// Richardson limit from the three finest levels.
    pub extrapolated: Option<f64>,
}

/// `λ₁` of `pair` rebuilt at each `N`, with an observed order and Richardson limit.
pub fn convergence_study(pair: &OperatorPair, refinements: &[usize]) -> Result<ConvergenceReport> {
    let mut levels = Vec::with_capacity(refinements.len());
    for &n in refinements {
        let refined = if n == pair.dim() { pair.clone() } else { pair.rebuild(n)? };
        let l1 = refined.pencil().eigenvalue(1).ok_or_else(|| Error::numerical("empty pencil"))?;
        levels.push((n, l1));
    }
    let (mut order, mut extrapolated) = (None, None);
    if let [.., (n0, l0), (n1, l1), (n2, l2)] = levels[..] {
        let (d1, d2) = (l1 - l0, l2 - l1);
        let r = n1 as f64 / n0 as f64;
        let consistent = ((n2 as f64 / n1 as f64) - r).abs() < 0.05 * r && r > 1.0;
        let q = d2 / d1;
        if consistent && d1 != 0.0 && q > 0.0 && q < 1.0 {
            order = Some(-q.ln() / r.ln());
            extrapolated = Some(l2 + d2 * q / (1.0 - q));
        }
    }
    Ok(ConvergenceReport { kind: pair.kind(), s: pair.params().s(), levels, order, extrapolated })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DefinitionComparison {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub s: f64,
    pub restricted: Vec<f64>,
    pub spectral: Vec<f64>,
    pub lambda1_restricted: f64,
    pub lambda1_spectral: f64,
    /// `λ₁^spectral - λ₁^restricted`.
    pub gap: f64,
}

/// First `modes` eigenvalues of the restricted and spectral operators on the same grid.
pub fn compare_definitions(grid: &Grid1D, params: &crate::params::FracParams, modes: usize) -> Result<DefinitionComparison> {
    let restricted_pair = OperatorPair::build(OperatorKind::Restricted, grid, params)?;
    let spectral_pair = OperatorPair::build(OperatorKind::Spectral, grid, params)?;
    let restricted = solve_spectrum(&restricted_pair, modes)?.eigenvalues();
    let spectral = solve_spectrum(&spectral_pair, modes)?.eigenvalues();
    Ok(DefinitionComparison {
        a: grid.a(),
        b: grid.b(),
        n: grid.len(),
        s: params.s(),
        lambda1_restricted: restricted[0],
        lambda1_spectral: spectral[0],
        gap: spectral[0] - restricted[0],
        restricted,
        spectral,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{assemble_restricted, assemble_spectral};
    use crate::params::FracParams;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn spectral(n: usize, s: f64) -> OperatorPair {
        let grid = Grid1D::new(0.0, 1.0, n).unwrap();
        assemble_spectral(&grid, &FracParams::new(s).unwrap(), n).unwrap()
    }

    fn restricted(n: usize, s: f64) -> OperatorPair {
        let grid = Grid1D::new(-1.0, 1.0, n).unwrap();
        assemble_restricted(&grid, &FracParams::new(s).unwrap()).unwrap()
    }

    #[test]
    fn spectral_eigenvalues_are_exact() {
        let spec = solve_spectrum(&spectral(40, 0.5), 4).unwrap();
        for k in 1..=4 {
            assert_relative_eq!(spec.eigenvalue(k), k as f64 * PI, max_relative = 1e-10);
        }
        let spec = solve_spectrum(&spectral(40, 0.75), 1).unwrap();
        assert_relative_eq!(spec.eigenvalue(1), PI.powf(1.5), max_relative = 1e-10);
    }

    #[test]
    fn eigenvectors_are_mass_orthonormal_and_signed() {
        let pair = restricted(48, 0.4);
        let spec = solve_spectrum(&pair, 5).unwrap();
        for j in 1..=5 {
            for k in 1..=5 {
                let m = pair.mass(spec.eigenvector(j), spec.eigenvector(k)).unwrap();
                let expected = if j == k { 1.0 } else { 0.0 };
                assert!((m - expected).abs() < 1e-10);
            }
        }
        assert!(spec.eigenvector(1).iter().all(|v| *v > 0.0));
        for k in 2..=5 {
            let phi = spec.eigenvector(k);
            assert!(phi.min() < 0.0 && phi.max() > 0.0);
        }
        assert!(spec.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rank_and_zero_vector_errors() {
        let pair = restricted(8, 0.4);
        assert!(matches!(solve_spectrum(&pair, 9), Err(Error::Rank { .. })));
        assert!(matches!(solve_spectrum(&pair, 0), Err(Error::Rank { .. })));
        assert!(matches!(rayleigh(&pair, &DVector::zeros(8)), Err(Error::Domain(_))));
    }

    #[test]
    fn two_mode_rayleigh_expansion() {
        let pair = restricted(32, 0.4);
        let spec = solve_spectrum(&pair, 2).unwrap();
        let (l1, l2) = (spec.eigenvalue(1), spec.eigenvalue(2));
        for eps in [0.1, 0.01] {
            let u = spec.eigenvector(1) + spec.eigenvector(2) * eps;
            let got = rayleigh(&pair, &u).unwrap() - l1;
            let expected = eps * eps * (l2 - l1) / (1.0 + eps * eps);
            assert_relative_eq!(got, expected, max_relative = 1e-8);
        }
    }

    #[test]
    fn spectral_isolatedness_gap_is_pi() {
        let pair = spectral(16, 0.5);
        let report = isolatedness_certificate(&pair, &[16, 32, 64]).unwrap();
        assert_eq!(report.status, CertificateStatus::Certified);
        assert_relative_eq!(report.extrapolated_gap.unwrap(), PI, max_relative = 1e-10);
        let single = isolatedness_certificate(&pair, &[16]).unwrap();
        assert_eq!(single.status, CertificateStatus::Inconclusive);
        assert!(single.extrapolated_gap.is_none());
    }

    #[test]
    fn spectral_nodal_domains_split_at_midpoint() {
        for n in [31, 32] {
            let pair = spectral(n, 0.5);
            let spec = solve_spectrum(&pair, 3).unwrap();
            let first = nodal_analysis(&spec, pair.grid(), 1, 0.5).unwrap();
            assert_eq!(first.domains, vec![NodalDomain { start: 0.0, end: 1.0, sign: 1 }]);
            let second = nodal_analysis(&spec, pair.grid(), 2, 0.5).unwrap();
            assert_eq!(second.domains.len(), 2);
            assert_relative_eq!(second.domains[0].end, 0.5, epsilon = 1e-12);
            assert_relative_eq!(second.min_measure, 0.5, epsilon = 1e-12);
            assert_relative_eq!(second.bound_product, 0.5 * (2.0 * PI), max_relative = 1e-10);
            assert_eq!(second.domains[0].sign, -second.domains[1].sign);
            assert!(second.exploratory);
        }
    }

    #[test]
    fn spectral_definition_sits_above_restricted() {
        let grid = Grid1D::new(-1.0, 1.0, 64).unwrap();
        let cmp = compare_definitions(&grid, &FracParams::new(0.5).unwrap(), 3).unwrap();
        assert_relative_eq!(cmp.lambda1_spectral, PI / 2.0, max_relative = 1e-10);
        assert!(cmp.gap > 0.0);
        assert_eq!(cmp.restricted.len(), 3);
    }

    #[test]
    fn spectral_convergence_is_flat() {
        let report = convergence_study(&spectral(16, 0.5), &[16, 32, 64]).unwrap();
        assert!(report.levels.iter().all(|(_, l)| (l - PI).abs() < 1e-10));
        assert!(report.order.is_none());
    }

    #[test]
    fn index_takes_the_three_values() {
        let pair = restricted(32, 0.4);
        let spec = solve_spectrum(&pair, 3).unwrap();
        let l: Vec<f64> = spec.eigenvalues();
        assert_eq!(trivial_branch_index(&pair, 0.5 * l[0]), 1);
        assert_eq!(trivial_branch_index(&pair, 0.5 * (l[0] + l[1])), -1);
        assert_eq!(trivial_branch_index(&pair, 0.5 * (l[1] + l[2])), 1);
        assert_eq!(trivial_branch_index(&pair, l[0]), 0);
    }
}
