//! Solution branches of `S u - λ T u - T f(λ, x, u) = 0`.
//!
//! Newton's method is run on the square system bordered by one linear
//! constraint `α λ + gᵀu = β`, which covers fixed `λ`, pseudo-arclength and
//! amplitude-pinned corrections. Distances in `(λ, u)` are measured in
//! `‖(λ, u)‖_W = (λ² + uᵀSu)^{1/2}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::inertia::TridiagonalPencil;
use crate::nonlinearity::NonlinearTerm;
use crate::operator::OperatorPair;
use crate::spectrum::{Spectrum, INDEX_TOL};

/// `S u - λ T u - T f(λ, x, u)`.
pub fn residual(pair: &OperatorPair, term: &NonlinearTerm, lambda: f64, u: &DVector<f64>) -> Result<DVector<f64>> {
    let f = term.apply(pair, lambda, u)?;
    Ok(pair.stiffness() * u - pair.apply_mass(&(u * lambda + f)))
}

/// Solves `S w = T h`.
pub fn resolvent(pair: &OperatorPair, h: &DVector<f64>) -> Result<DVector<f64>> {
    Error::check_len(pair.dim(), h.len())?;
    pair.solve_stiffness(&pair.apply_mass(h))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Relative tolerance; the absolute one is `tol · max(1, ‖T⁻¹Su‖∞ + |λ|‖u‖∞)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 25 }
    }
}

/// Shared, read-only data of a continuation run.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub pair: &'a OperatorPair,
    pub term: &'a NonlinearTerm,
    pub spectrum: &'a Spectrum,
    pub newton: NewtonOptions,
    /// Relative tolerance for matching a detected event to an eigenvalue.
    pub match_tol: f64,
    pub exec: Execution,
}

impl<'a> Problem<'a> {
    pub fn new(pair: &'a OperatorPair, term: &'a NonlinearTerm, spectrum: &'a Spectrum) -> Self {
        Self { pair, term, spectrum, newton: NewtonOptions::default(), match_tol: 1e-8, exec: Execution::default() }
    }

    pub fn with_exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    fn phi1(&self) -> &DVector<f64> {
        self.spectrum.eigenvector(1)
    }

    /// `‖(Δλ, Δu)‖_W`.
    pub fn w_distance(&self, a: (f64, &DVector<f64>), b: (f64, &DVector<f64>)) -> f64 {
        let du = a.1 - b.1;
        ((a.0 - b.0).powi(2) + self.pair.energy(&du, &du).unwrap_or(f64::NAN).max(0.0)).sqrt()
    }

    /// `G_u = S - λT - T diag(∂_t f)`.
    pub fn jacobian(&self, lambda: f64, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        let ft = self.term.apply_d_t(self.pair, lambda, u)?;
        let mut j = self.pair.stiffness().clone();
        let t = self.pair.mass_diag();
        for i in 0..u.len() {
            j[(i, i)] -= t[i] * (lambda + ft[i]);
        }
        Ok(j)
    }
}

/// Constraint appended to the Newton system.
#[derive(Debug, Clone)]
pub enum CorrectorMode {
    FixedLambda,
    /// `⟨tangent, (λ, u) - anchor⟩_W = ds` with a W-unit tangent.
    Arclength { anchor: (f64, DVector<f64>), tangent: (f64, DVector<f64>), ds: f64 },
    /// `modeᵀ T u = target`.
    Amplitude { mode: DVector<f64>, target: f64 },
}

struct LinearConstraint {
    alpha: f64,
    g: DVector<f64>,
    beta: f64,
}

impl LinearConstraint {
    fn value(&self, lambda: f64, u: &DVector<f64>) -> f64 {
        self.alpha * lambda + self.g.dot(u) - self.beta
    }
}

fn constraint_for(pair: &OperatorPair, mode: &CorrectorMode, lambda0: f64) -> LinearConstraint {
    let n = pair.dim();
    match mode {
        CorrectorMode::FixedLambda => LinearConstraint { alpha: 1.0, g: DVector::zeros(n), beta: lambda0 },
        CorrectorMode::Arclength { anchor, tangent, ds } => {
            let g = pair.stiffness() * &tangent.1;
            let beta = ds + tangent.0 * anchor.0 + g.dot(&anchor.1);
            LinearConstraint { alpha: tangent.0, g, beta }
        }
        CorrectorMode::Amplitude { mode, target } => {
            LinearConstraint { alpha: 0.0, g: pair.apply_mass(mode), beta: *target }
        }
    }
}

/// A converged solution with its diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchPoint {
    pub lambda: f64,
    #[serde(skip)]
    pub u: DVector<f64>,
    /// `φ₁ᵀ T u`.
    pub amplitude: f64,
    pub arclength: f64,
    /// `(λ² + uᵀSu)^{1/2}`.
    pub w_norm: f64,
    /// Negative eigenvalues of the pencil `(G_u, T)`.
    pub jacobian_inertia: usize,
    /// `‖T⁻¹ G(λ, u)‖∞`.
    pub residual: f64,
    /// `‖u - S⁻¹T(λu + f(λ, x, u))‖∞`.
    pub fixed_point_residual: f64,
    pub newton_tol: f64,
    /// `G_u` has an eigenvalue within the index tolerance of zero.
    pub near_bifurcation: bool,
}

#[derive(Debug, Clone)]
pub struct Corrected {
    pub point: BranchPoint,
    /// `‖T⁻¹ G‖∞` before each Newton step, ending with the accepted value.
    pub history: Vec<f64>,
}

impl Corrected {
    pub fn iterations(&self) -> usize {
        self.history.len() - 1
    }
}

fn scaled_residual(pair: &OperatorPair, g: &DVector<f64>) -> f64 {
    g.iter().zip(pair.mass_diag().iter()).map(|(gi, t)| (gi / t).abs()).fold(0.0, f64::max)
}

fn residual_scale(pair: &OperatorPair, lambda: f64, u: &DVector<f64>) -> Result<f64> {
    Ok((pair.apply_operator(u)?.amax() + lambda.abs() * u.amax()).max(1.0))
}

/// Evaluates the diagnostics of `(λ, u)` without correcting it.
pub fn evaluate_point(problem: &Problem, lambda: f64, u: DVector<f64>, tol: f64) -> Result<BranchPoint> {
    let pair = problem.pair;
    let g = residual(pair, problem.term, lambda, &u)?;
    let fixed = pair.solve_stiffness(&g)?.amax();
    let jac = problem.jacobian(lambda, &u)?;
    let inertia = TridiagonalPencil::new(&jac, pair.mass_diag()).inertia(0.0, INDEX_TOL * lambda.abs().max(1.0));
    let energy = pair.energy(&u, &u)?.max(0.0);
    Ok(BranchPoint {
        lambda,
        amplitude: pair.mass(problem.phi1(), &u)?,
        arclength: 0.0,
        w_norm: (lambda * lambda + energy).sqrt(),
        jacobian_inertia: inertia.negative,
        residual: scaled_residual(pair, &g),
        fixed_point_residual: fixed,
        newton_tol: tol,
        near_bifurcation: inertia.zero > 0,
        u,
    })
}

/// Newton iteration from `(λ0, u0)` with the constraint selected by `mode`.
pub fn newton_correct(problem: &Problem, lambda0: f64, u0: &DVector<f64>, mode: &CorrectorMode) -> Result<Corrected> {
    let pair = problem.pair;
    let term = problem.term;
    let n = pair.dim();
    Error::check_len(n, u0.len())?;
    let constraint = constraint_for(pair, mode, lambda0);
    let c_scale = constraint.beta.abs().max(1.0);
    let t = pair.mass_diag();

    let mut lambda = lambda0;
    let mut u = u0.clone();
    let mut history = Vec::new();
    for it in 0..=problem.newton.max_iter {
        let g = residual(pair, term, lambda, &u)?;
        let c = constraint.value(lambda, &u);
        let tol = problem.newton.tol * residual_scale(pair, lambda, &u)?;
        let res = scaled_residual(pair, &g);
        history.push(res);
        if !res.is_finite() || !lambda.is_finite() {
            break;
        }
        if res <= tol && c.abs() <= problem.newton.tol * c_scale {
            let fixed = pair.solve_stiffness(&g)?.amax();
            if fixed <= tol {
                let point = evaluate_point(problem, lambda, u, tol)?;
                return Ok(Corrected { point, history });
            }
        }
        if it == problem.newton.max_iter {
            break;
        }
        let ft = term.apply_d_t(pair, lambda, &u)?;
        let fl = term.apply_d_lambda(pair, lambda, &u)?;
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(pair.stiffness());
        for i in 0..n {
            m[(i, i)] -= t[i] * (lambda + ft[i]);
            m[(i, n)] = -t[i] * (u[i] + fl[i]);
            m[(n, i)] = constraint.g[i];
        }
        m[(n, n)] = constraint.alpha;
        let mut rhs = DVector::zeros(n + 1);
        rhs.rows_mut(0, n).copy_from(&(-&g));
        rhs[n] = -c;
        let Some(step) = m.lu().solve(&rhs) else {
            return Err(Error::StepFailure { iterations: it, residual: res });
        };
        u += step.rows(0, n);
        lambda += step[n];
    }
    Err(Error::StepFailure { iterations: history.len().saturating_sub(1), residual: history.last().copied().unwrap_or(f64::NAN) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionMethod {
    /// Inertia counts of the pencil `(S, T)`; used when `∂_t f(λ, x, 0) ≡ 0`.
    IndexJump,
    /// Inertia of the full linearization `G_u(λ, 0)` recomputed at each `λ`.
    DeterminantSignChange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenMatch {
    pub k: usize,
    pub lambda_k: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BifurcationEvent {
    pub lambda_detected: f64,
    /// Negative inertia of `G_u(λ, 0)` just below and above the event.
    pub inertia_below: usize,
    pub inertia_above: usize,
    pub matched: Option<EigenMatch>,
    pub method: DetectionMethod,
}

impl BifurcationEvent {
    /// Index `(-1)^m` of the trivial solution on either side.
    pub fn index_change(&self) -> (i32, i32) {
        let sign = |m: usize| if m.is_multiple_of(2) { 1 } else { -1 };
        (sign(self.inertia_below), sign(self.inertia_above))
    }
}

/// Relative width at which event bisection stops.
pub const BISECTION_TOL: f64 = 1e-12;

/// Scans the trivial branch over `range` with `samples` intervals and
/// records every change of the linearization's inertia, refined by bisection.
pub fn detect_bifurcations(problem: &Problem, range: (f64, f64), samples: usize) -> Result<Vec<BifurcationEvent>> {
    let (lo, hi) = range;
    if !(lo < hi) || samples == 0 {
        return Err(Error::domain(format!("invalid scan range ({lo}, {hi}) with {samples} samples")));
    }
    let pair = problem.pair;
    let n = pair.dim();
    let zero = DVector::zeros(n);
    let lambdas: Vec<f64> = (0..=samples).map(|j| lo + (hi - lo) * j as f64 / samples as f64).collect();

    let mut linear_part = false;
    for &lam in &lambdas {
        if problem.term.apply(pair, lam, &zero)?.amax() != 0.0 {
            return Err(Error::Hypothesis(format!("f(λ, x, 0) does not vanish at λ = {lam}: no trivial branch")));
        }
        linear_part |= problem.term.apply_d_t(pair, lam, &zero)?.amax() != 0.0;
    }
    let method = if linear_part { DetectionMethod::DeterminantSignChange } else { DetectionMethod::IndexJump };
    let count = |lam: f64| -> usize {
        match method {
            DetectionMethod::IndexJump => pair.pencil().count_below(lam),
            DetectionMethod::DeterminantSignChange => {
                let jac = problem.jacobian(lam, &zero).expect("shape checked");
                TridiagonalPencil::new(&jac, pair.mass_diag()).count_below(0.0)
            }
        }
    };
    if method == DetectionMethod::IndexJump {
        pair.pencil();
    }
    let counts = problem.exec.map(lambdas.len(), |j| count(lambdas[j]));

    let mut crossings = Vec::new();
    for j in 0..samples {
        if counts[j] != counts[j + 1] {
            isolate(&count, (lambdas[j], counts[j]), (lambdas[j + 1], counts[j + 1]), &mut crossings);
        }
    }
    let eig = problem.spectrum.eigenvalues();
    Ok(crossings
        .into_iter()
        .map(|(lam, below, above)| {
            let matched = eig
                .iter()
                .enumerate()
                .map(|(i, lk)| EigenMatch { k: i + 1, lambda_k: *lk, delta: (lam - lk).abs() })
                .min_by(|a, b| a.delta.total_cmp(&b.delta))
                .filter(|m| m.delta <= problem.match_tol * m.lambda_k.abs().max(1.0));
            BifurcationEvent { lambda_detected: lam, inertia_below: below, inertia_above: above, matched, method }
        })
        .collect())
}

/// Splits `(lo, hi)` until each piece carries a single inertia change.
fn isolate(count: &impl Fn(f64) -> usize, lo: (f64, usize), hi: (f64, usize), out: &mut Vec<(f64, usize, usize)>) {
    let (mut a, mut ca) = lo;
    let (mut b, mut cb) = hi;
    loop {
        let mid = 0.5 * (a + b);
        if b - a <= BISECTION_TOL * mid.abs().max(1.0) || mid <= a || mid >= b {
            // unresolved multiple crossings are reported once per unit of inertia
            for _ in 0..ca.abs_diff(cb) {
                out.push((mid, ca, cb));
            }
            return;
        }
        let cm = count(mid);
        let left = cm != ca;
        let right = cm != cb;
        if left && right {
            isolate(count, (a, ca), (mid, cm), out);
            isolate(count, (mid, cm), (b, cb), out);
            return;
        }
        if left {
            (b, cb) = (mid, cm);
        } else {
            (a, ca) = (mid, cm);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BranchOrigin {
    Trivial,
    BifurcatedFrom { lambda: f64, k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchStatus {
    Alive,
    LeftDomain,
    Folded,
    MaxSteps,
}

/// Trivial anchor and first nontrivial point of a branch.
#[derive(Debug, Clone)]
pub struct BranchSeed {
    pub origin: BranchOrigin,
    pub anchor: BranchPoint,
    pub first: BranchPoint,
}

/// Predictor `(λ_k, a₀ φ_k)` corrected with `φ_kᵀ T u = a₀` held fixed.
pub fn branch_switch(problem: &Problem, event: &BifurcationEvent, amplitude0: f64) -> Result<BranchSeed> {
    let m = event
        .matched
        .ok_or_else(|| Error::Hypothesis(format!("event at λ = {} is not an eigenvalue", event.lambda_detected)))?;
    let spec = problem.spectrum;
    let k = m.k;
    let lk = spec.eigenvalue(k);
    let simple_tol = 1e-8 * lk.max(1.0);
    let neighbour_close = (k > 1 && (lk - spec.eigenvalue(k - 1)).abs() <= simple_tol)
        || (k < spec.len() && (spec.eigenvalue(k + 1) - lk).abs() <= simple_tol);
    if neighbour_close {
        return Err(Error::Hypothesis(format!("λ_{k} = {lk} is not simple")));
    }
    if !(amplitude0 != 0.0 && amplitude0.is_finite()) {
        return Err(Error::SwitchFailure { amplitude: amplitude0 });
    }
    let phi = spec.eigenvector(k);
    let mode = CorrectorMode::Amplitude { mode: phi.clone(), target: amplitude0 };
    let first = newton_correct(problem, lk, &(phi * amplitude0), &mode)
        .map_err(|_| Error::SwitchFailure { amplitude: amplitude0 })?
        .point;
    if problem.pair.x_norm(&first.u)? <= 1e-6 * amplitude0.abs() {
        return Err(Error::SwitchFailure { amplitude: amplitude0 });
    }
    let anchor = evaluate_point(problem, lk, DVector::zeros(phi.len()), first.newton_tol)?;
    let mut first = first;
    first.arclength = problem.w_distance((first.lambda, &first.u), (anchor.lambda, &anchor.u));
    Ok(BranchSeed { origin: BranchOrigin::BifurcatedFrom { lambda: lk, k }, anchor, first })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceOptions {
    pub ds: f64,
    pub max_steps: usize,
    /// Radius of the W-norm box whose exit ends the trace.
    pub box_radius: f64,
    pub stop_at_fold: bool,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self { ds: 0.1, max_steps: 400, box_radius: 10.0, stop_at_fold: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    pub origin: BranchOrigin,
    pub status: BranchStatus,
    /// Indices of points where the λ-component of the secant changed sign.
    pub folds: Vec<usize>,
    /// `λ` of points with `‖u‖_X < 1e-6` after the start.
    pub trivial_returns: Vec<f64>,
    /// Largest `‖Δ(λ, u)‖_W / ds` over accepted steps.
    pub max_step_ratio: f64,
    pub rejected_steps: usize,
    pub diagnostic: Option<String>,
}

const EASY_ITERATIONS: usize = 3;
const GROWTH: f64 = 1.3;

/// Secant pseudo-arclength continuation from a seed.
pub fn trace(problem: &Problem, seed: &BranchSeed, opts: &TraceOptions) -> Result<Branch> {
    if !(opts.ds > 0.0 && opts.box_radius > 0.0) {
        return Err(Error::domain("step size and box radius must be positive"));
    }
    let pair = problem.pair;
    let (ds_min, ds_max) = (opts.ds / 64.0, opts.ds * 4.0);
    let mut ds = opts.ds;
    let mut branch = Branch {
        points: vec![seed.anchor.clone(), seed.first.clone()],
        origin: seed.origin,
        status: BranchStatus::Alive,
        folds: Vec::new(),
        trivial_returns: Vec::new(),
        max_step_ratio: 0.0,
        rejected_steps: 0,
        diagnostic: None,
    };
    let mut accepted = 0;
    let mut prev_dlambda = seed.first.lambda - seed.anchor.lambda;
    while accepted < opts.max_steps {
        let len = branch.points.len();
        let (prev, cur) = (&branch.points[len - 2], &branch.points[len - 1]);
        let secant_len = problem.w_distance((cur.lambda, &cur.u), (prev.lambda, &prev.u));
        let tangent = ((cur.lambda - prev.lambda) / secant_len, (&cur.u - &prev.u) / secant_len);
        let predictor = (cur.lambda + ds * tangent.0, &cur.u + &tangent.1 * ds);
        let mode = CorrectorMode::Arclength { anchor: (cur.lambda, cur.u.clone()), tangent: tangent.clone(), ds };
        let outcome = newton_correct(problem, predictor.0, &predictor.1, &mode);
        let step = match outcome {
            Ok(c) => {
                let dist = problem.w_distance((c.point.lambda, &c.point.u), (cur.lambda, &cur.u));
                (dist > 0.0 && dist <= 2.0 * ds).then_some((c, dist))
            }
            Err(Error::StepFailure { .. }) => None,
            Err(e) => return Err(e),
        };
        let Some((corrected, dist)) = step else {
            branch.rejected_steps += 1;
            if ds <= ds_min {
                branch.status = BranchStatus::MaxSteps;
                branch.diagnostic = Some(format!("corrector failed at the minimum step {ds_min:.3e} near λ = {}", cur.lambda));
                return Ok(branch);
            }
            ds = (0.5 * ds).max(ds_min);
            continue;
        };
        let iterations = corrected.iterations();
        let mut point = corrected.point;
        point.arclength = cur.arclength + dist;
        branch.max_step_ratio = branch.max_step_ratio.max(dist / ds);
        let dlambda = point.lambda - cur.lambda;
        let folded = dlambda != 0.0 && prev_dlambda != 0.0 && dlambda.signum() != prev_dlambda.signum();
        if dlambda != 0.0 {
            prev_dlambda = dlambda;
        }
        if pair.x_norm(&point.u)? < 1e-6 {
            branch.trivial_returns.push(point.lambda);
        }
        let outside = point.w_norm > opts.box_radius;
        branch.points.push(point);
        accepted += 1;
        if folded {
            branch.folds.push(branch.points.len() - 2);
            if opts.stop_at_fold {
                branch.status = BranchStatus::Folded;
                return Ok(branch);
            }
        }
        if outside {
            branch.status = BranchStatus::LeftDomain;
            return Ok(branch);
        }
        if iterations <= EASY_ITERATIONS {
            ds = (ds * GROWTH).min(ds_max);
        }
    }
    branch.status = BranchStatus::MaxSteps;
    branch.diagnostic = Some(format!("stopped after {} accepted steps", opts.max_steps));
    Ok(branch)
}
