//! Numerical counterparts of the two bifurcation theorems.
//!
//! The first traces the pitchfork leaving `(λ₁, 0)` in both directions and
//! compares its onset with the one-mode reduction; the second checks that every
//! bifurcation value found on the trivial branch is an eigenvalue, and that
//! Newton started near zero away from the spectrum falls back to zero.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::continuation::{
    branch_switch, detect_bifurcations, newton_correct, trace, BifurcationEvent, Branch, BranchStatus, CorrectorMode,
    Problem, TraceOptions,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Config {
    pub amplitude0: f64,
    pub onset_range: (f64, f64),
    pub onset_points: usize,
    /// Tolerance on the relative error of the fitted onset coefficient.
    pub onset_tol: f64,
    /// Tolerance on the mirror deviation, relative to `max(1, ‖u‖∞)`.
    pub mirror_tol: f64,
    pub trace: TraceOptions,
}

impl Default for Theorem1Config {
    fn default() -> Self {
        Self {
            amplitude0: 1e-2,
            onset_range: (5e-3, 5e-2),
            onset_points: 10,
            onset_tol: 0.05,
            mirror_tol: 1e-8,
            trace: TraceOptions::default(),
        }
    }
}

/// Least-squares fit `λ(a) - λ₁ = c |a|^p + d |a|^{2p}` with `p = γ - 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OnsetFit {
    pub exponent: f64,
    pub amplitudes: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub coefficient: f64,
    pub higher_order: f64,
    /// One-mode prediction `-Σ h φ₁ f(λ₁, x, φ₁)`.
    pub predicted: f64,
    /// Relative error against the prediction (absolute when the prediction is zero).
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MirrorCheck {
    pub compared_points: usize,
    pub max_u_deviation: f64,
    pub max_lambda_deviation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchSummary {
    pub status: BranchStatus,
    pub points: usize,
    pub final_lambda: f64,
    pub final_w_norm: f64,
    pub max_step_ratio: f64,
    pub folds: usize,
    /// λ nondecreasing and amplitude monotone along the branch.
    pub monotone: bool,
}

impl BranchSummary {
    pub fn of(branch: &Branch) -> Self {
        let pts = &branch.points;
        let last = pts.last().expect("branches start with two points");
        let sign = pts[1].amplitude.signum();
        let monotone = pts.windows(2).all(|w| {
            w[1].lambda >= w[0].lambda - 1e-12 * w[0].lambda.abs().max(1.0) && sign * (w[1].amplitude - w[0].amplitude) > 0.0
        });
        Self {
            status: branch.status,
            points: pts.len(),
            final_lambda: last.lambda,
            final_w_norm: last.w_norm,
            max_step_ratio: branch.max_step_ratio,
            folds: branch.folds.len(),
            monotone,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Theorem1Report {
    pub s: f64,
    /// `s` outside `1/4 < s < 1/2`, where the theorem makes no claim.
    pub exploratory: bool,
    pub lambda1: f64,
    pub event: Option<BifurcationEvent>,
    pub onset: OnsetFit,
    pub positive: BranchSummary,
    pub negative: BranchSummary,
    pub mirror: MirrorCheck,
    pub exits_box: bool,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct Theorem1Outcome {
    pub report: Theorem1Report,
    /// Branches traced from `+a₀` and `-a₀`.
    pub branches: [Branch; 2],
}

pub fn onset_fit(problem: &Problem, range: (f64, f64), points: usize) -> Result<OnsetFit> {
    if !(0.0 < range.0 && range.0 < range.1) || points < 2 {
        return Err(Error::domain("onset fit needs 0 < a_min < a_max and at least two amplitudes"));
    }
    let spec = problem.spectrum;
    let (l1, phi) = (spec.eigenvalue(1), spec.eigenvector(1));
    let p = problem.term.gamma() - 1.0;
    let f_phi = problem.term.apply(problem.pair, l1, phi)?;
    let predicted = -problem.pair.mass(phi, &f_phi)?;
    let amplitudes: Vec<f64> = (0..points)
        .map(|i| (range.0.ln() + (range.1 / range.0).ln() * i as f64 / (points - 1) as f64).exp())
        .collect();
    let lambdas = problem
        .exec
        .map(points, |i| {
            let a = amplitudes[i];
            let mode = CorrectorMode::Amplitude { mode: phi.clone(), target: a };
            newton_correct(problem, l1 + predicted * a.powf(p), &(phi * a), &mode).map(|c| c.point.lambda)
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;

    // normal equations for [a^p, a^{2p}]
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (a, lam) in amplitudes.iter().zip(&lambdas) {
        let (x1, x2) = (a.powf(p), a.powf(2.0 * p));
        let y = lam - l1;
        s11 += x1 * x1;
        s12 += x1 * x2;
        s22 += x2 * x2;
        r1 += x1 * y;
        r2 += x2 * y;
    }
    let det = s11 * s22 - s12 * s12;
    let coefficient = (r1 * s22 - r2 * s12) / det;
    let higher_order = (s11 * r2 - s12 * r1) / det;
    let error = if predicted != 0.0 { (coefficient - predicted).abs() / predicted.abs() } else { coefficient.abs() };
    Ok(OnsetFit { exponent: p, amplitudes, lambdas, coefficient, higher_order, predicted, error })
}

fn mirror_check(plus: &Branch, minus: &Branch, tol: f64) -> MirrorCheck {
    let count = plus.points.len().min(minus.points.len());
    let (mut du, mut dl): (f64, f64) = (0.0, 0.0);
    let mut pass = plus.points.len() == minus.points.len();
    for (p, m) in plus.points.iter().zip(&minus.points) {
        let u_dev = (&p.u + &m.u).amax();
        let l_dev = (p.lambda - m.lambda).abs();
        du = du.max(u_dev);
        dl = dl.max(l_dev);
        pass &= u_dev <= tol * p.u.amax().max(1.0) && l_dev <= tol * p.lambda.abs().max(1.0);
    }
    MirrorCheck { compared_points: count, max_u_deviation: du, max_lambda_deviation: dl, pass }
}

/// Detects the event at `λ₁`, fits the onset, and traces both halves of the pitchfork.
pub fn theorem1_experiment(problem: &Problem, config: &Theorem1Config) -> Result<Theorem1Outcome> {
    let spec = problem.spectrum;
    if spec.len() < 2 {
        return Err(Error::Rank { requested: 2, available: spec.len() });
    }
    let (l1, l2) = (spec.eigenvalue(1), spec.eigenvalue(2));
    let events = detect_bifurcations(problem, (0.5 * l1, 0.5 * (l1 + l2)), 16)?;
    let event = events.iter().copied().find(|e| e.matched.is_some_and(|m| m.k == 1));
    let onset = onset_fit(problem, config.onset_range, config.onset_points)?;
    let seed_event = event.ok_or_else(|| Error::numerical("no bifurcation event matched to λ₁"))?;
    let branches = problem.exec.map(2, |i| {
        let a0 = if i == 0 { config.amplitude0 } else { -config.amplitude0 };
        let seed = branch_switch(problem, &seed_event, a0)?;
        trace(problem, &seed, &config.trace)
    });
    let mut it = branches.into_iter();
    let plus = it.next().expect("two branches")?;
    let minus = it.next().expect("two branches")?;
    let mirror = mirror_check(&plus, &minus, config.mirror_tol);
    let exits_box = plus.status == BranchStatus::LeftDomain && minus.status == BranchStatus::LeftDomain;
    let params = problem.pair.params();
    let pass = onset.error <= config.onset_tol && mirror.pass && exits_box;
    let report = Theorem1Report {
        s: params.s(),
        exploratory: !params.theorem_range(),
        lambda1: l1,
        event,
        onset,
        positive: BranchSummary::of(&plus),
        negative: BranchSummary::of(&minus),
        mirror,
        exits_box,
        pass,
    };
    Ok(Theorem1Outcome { report, branches: [plus, minus] })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Config {
    pub samples: usize,
    pub probes: usize,
    pub seed: u64,
    /// Sup-norm of the random starting perturbation.
    pub perturbation: f64,
    /// Minimum probe distance from the spectrum as a fraction of `λ₂ - λ₁`.
    pub separation: f64,
}

impl Default for Theorem2Config {
    fn default() -> Self {
        Self { samples: 200, probes: 10, seed: 20240601, perturbation: 1e-3, separation: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub lambda: f64,
    pub initial_x_norm: f64,
    pub final_x_norm: f64,
    pub iterations: Option<usize>,
    pub trivial: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Theorem2Report {
    pub range: (f64, f64),
    pub events: Vec<BifurcationEvent>,
    /// Eigenvalues `(k, λ_k)` of the pencil inside the range.
    pub expected: Vec<(usize, f64)>,
    pub all_matched: bool,
    /// Eigenvalue indices in the range with no event.
    pub missing: Vec<usize>,
    pub probes: Vec<Probe>,
    pub pass: bool,
}

/// Draws for a probe are bounded so a range with no admissible `λ` fails instead of looping.
const MAX_DRAWS: usize = 10_000;

pub fn theorem2_experiment(problem: &Problem, range: (f64, f64), config: &Theorem2Config) -> Result<Theorem2Report> {
    let pair = problem.pair;
    let spec = problem.spectrum;
    if spec.len() < 2 {
        return Err(Error::Rank { requested: 2, available: spec.len() });
    }
    let events = detect_bifurcations(problem, range, config.samples)?;
    let inside = pair.pencil().count_below(range.1) - pair.pencil().count_below(range.0);
    let first = pair.pencil().count_below(range.0) + 1;
    if first + inside - 1 > spec.len() {
        return Err(Error::Rank { requested: first + inside - 1, available: spec.len() });
    }
    let expected: Vec<(usize, f64)> = (first..first + inside).map(|k| (k, spec.eigenvalue(k))).collect();
    let missing: Vec<usize> = expected
        .iter()
        .filter(|(k, _)| !events.iter().any(|e| e.matched.is_some_and(|m| m.k == *k)))
        .map(|(k, _)| *k)
        .collect();
    let all_matched = events.iter().all(|e| e.matched.is_some());

    let sep = config.separation * (spec.eigenvalue(2) - spec.eigenvalue(1));
    let event_lambdas: Vec<f64> = events.iter().map(|e| e.lambda_detected).collect();
    let admissible = |lam: f64| {
        pair.pencil().count_below(lam - sep) == pair.pencil().count_below(lam + sep)
            && event_lambdas.iter().all(|e| (lam - e).abs() >= sep)
    };
    pair.pencil();
    let n = pair.dim();
    let probes = problem
        .exec
        .map(config.probes, |i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(i as u64));
            let lambda = (0..MAX_DRAWS)
                .map(|_| rng.random_range(range.0..range.1))
                .find(|l| admissible(*l))
                .ok_or_else(|| Error::domain("no probe value keeps the required distance from the spectrum"))?;
            let u0 = DVector::from_fn(n, |_, _| config.perturbation * rng.random_range(-1.0..1.0));
            let initial = pair.x_norm(&u0)?;
            Ok(match newton_correct(problem, lambda, &u0, &CorrectorMode::FixedLambda) {
                Ok(c) => {
                    let final_x_norm = pair.x_norm(&c.point.u)?;
                    Probe {
                        lambda,
                        initial_x_norm: initial,
                        final_x_norm,
                        iterations: Some(c.iterations()),
                        trivial: final_x_norm <= 1e-6 * initial,
                    }
                }
                Err(Error::StepFailure { .. }) => {
                    Probe { lambda, initial_x_norm: initial, final_x_norm: f64::NAN, iterations: None, trivial: false }
                }
                Err(e) => return Err(e),
            })
        })
        .into_iter()
        .collect::<Result<Vec<Probe>>>()?;
    let pass = all_matched && missing.is_empty() && probes.iter().all(|p| p.trivial);
    Ok(Theorem2Report { range, events, expected, all_matched, missing, probes, pass })
}
