//! The `verify` suites: Picone property runs, the elementary inequality,
//! little-o certificates, the index jump at `λ₁`, and the definition comparison.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::nonlinearity::{builtin, check_gamma, little_o_certificate, LittleOReport, TermSpec};
use crate::operator::{assemble_restricted_with, OperatorPair};
use crate::params::FracParams;
use crate::picone::{
    elementary_property_run, isolatedness_contradiction_demo, picone_property_run, ContradictionReport, PropertySummary,
};
use crate::spectrum::{compare_definitions, solve_spectrum, trivial_branch_index, DefinitionComparison, Spectrum};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PiconeSuite {
    pub s: f64,
    pub n: usize,
    pub faulted: bool,
    pub summary: PropertySummary,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LittleOSuite {
    pub gamma: f64,
    pub expected_slope: f64,
    pub report: LittleOReport,
    pub relative_error: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexJumpReport {
    pub lambda1: f64,
    pub lambda2: f64,
    /// `(λ, index)` for samples in `(0, λ₁)`.
    pub below: Vec<(f64, i32)>,
    /// `(λ, index)` for samples in `(λ₁, λ₂)`.
    pub above: Vec<(f64, i32)>,
    /// Sign flip of `det(S - λT)` located by bisection.
    pub located: f64,
    pub relative_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DefinitionSuite {
    pub comparison: DefinitionComparison,
    /// The restricted principal eigenvalue lies strictly below the spectral one.
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub picone: Vec<PiconeSuite>,
    pub contradiction: ContradictionReport,
    pub elementary: PropertySummary,
    pub little_o: Vec<LittleOSuite>,
    pub index_jump: IndexJumpReport,
    pub definitions: DefinitionSuite,
    pub pass: bool,
}

/// Relative width at which the flip bisection stops.
const FLIP_WIDTH: f64 = 1e-13;

/// Samples the trivial-branch index on both sides of `λ₁` and locates its flip.
pub fn index_jump_check(pair: &OperatorPair, spectrum: &Spectrum, samples: usize, seed: u64, tol: f64) -> Result<IndexJumpReport> {
    if spectrum.len() < 2 {
        return Err(Error::Rank { requested: 2, available: spectrum.len() });
    }
    let (l1, l2) = (spectrum.eigenvalue(1), spectrum.eigenvalue(2));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |lo: f64, hi: f64| -> Vec<(f64, i32)> {
        (0..samples)
            .map(|_| {
                let lam = rng.random_range(lo..hi);
                (lam, trivial_branch_index(pair, lam))
            })
            .collect()
    };
    let below = draw(0.0, l1);
    let above = draw(l1, l2);
    let pencil = pair.pencil();
    let (mut lo, mut hi) = (0.5 * l1, 0.5 * (l1 + l2));
    while hi - lo > FLIP_WIDTH * l1 {
        let mid = 0.5 * (lo + hi);
        if pencil.count_below(mid) == 0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let located = 0.5 * (lo + hi);
    let relative_error = (located - l1).abs() / l1;
    let pass = below.iter().all(|p| p.1 == 1) && above.iter().all(|p| p.1 == -1) && relative_error <= tol;
    Ok(IndexJumpReport { lambda1: l1, lambda2: l2, below, above, located, relative_error, tolerance: tol, pass })
}

fn picone_pair(cfg: &ExperimentConfig, s: f64) -> Result<OperatorPair> {
    let grid = Grid1D::new(cfg.domain.a, cfg.domain.b, cfg.verify.picone_n)?;
    let pair = assemble_restricted_with(&grid, &FracParams::new(s)?, cfg.scheme, cfg.execution)?;
    Ok(match cfg.fault_injection {
        Some(f) => pair.with_corrupted_weight(f.i, f.j, f.factor),
        None => pair,
    })
}

/// Runs every suite on the restricted operator described by `cfg`.
pub fn run_verify(cfg: &ExperimentConfig) -> Result<VerifyReport> {
    let v = &cfg.verify;
    let seed = cfg.seeds.rng_seed;
    let exec = cfg.execution;

    let picone = v
        .picone_s
        .iter()
        .map(|&s| {
            let pair = picone_pair(cfg, s)?;
            let summary = picone_property_run(&pair, v.picone_trials, seed, exec)?;
            Ok(PiconeSuite { s, n: v.picone_n, faulted: cfg.fault_injection.is_some(), pass: summary.passed(), summary })
        })
        .collect::<Result<Vec<_>>>()?;
    let elementary = elementary_property_run(v.elementary_trials, seed, exec);

    let grid = cfg.grid()?;
    let params = cfg.params()?;
    let pair = assemble_restricted_with(&grid, &params, cfg.scheme, exec)?;
    let spectrum = solve_spectrum(&pair, cfg.modes.max(2))?;
    let contradiction = isolatedness_contradiction_demo(&pair, &spectrum)?;

    let lambda1 = spectrum.eigenvalue(1);
    let direction = spectrum.eigenvector(1);
    let little_o = v
        .little_o_gammas
        .iter()
        .map(|&gamma| {
            check_gamma(gamma, &params).map_err(|e| Error::Config(format!("verify.little_o_gammas: {e}")))?;
            let term = builtin(&TermSpec::OddPower { gamma }, &pair)?;
            let report = little_o_certificate(&term, &pair, lambda1, direction, &v.little_o_eps)?;
            let expected = gamma - 1.0;
            let relative_error = report.slope.map(|p| (p - expected).abs() / expected);
            let pass = report.pass && relative_error.is_some_and(|e| e <= v.slope_tol);
            Ok(LittleOSuite { gamma, expected_slope: expected, report, relative_error, pass })
        })
        .collect::<Result<Vec<_>>>()?;

    let index_jump = index_jump_check(&pair, &spectrum, v.index_samples, seed, 1e-10)?;

    let comparison = compare_definitions(&grid, &params, cfg.modes.max(2))?;
    let definitions = DefinitionSuite { pass: comparison.gap > 0.0, comparison };

    let pass = picone.iter().all(|p| p.pass)
        && elementary.passed()
        && contradiction.contradiction
        && little_o.iter().all(|l| l.pass)
        && index_jump.pass
        && definitions.pass;
    Ok(VerifyReport { seed, picone, contradiction, elementary, little_o, index_jump, definitions, pass })
}
