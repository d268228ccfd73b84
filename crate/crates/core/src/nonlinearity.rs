//! Reaction terms `f(λ, x, t)`, their growth hypotheses as executable checks,
//! and the discrete Nemytskii operator.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::operator::OperatorPair;
use crate::params::FracParams;

pub type PointFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Builtin families selectable by name from a configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum TermSpec {
    Zero,
    /// `f = -|t|^{γ-1} t`.
    OddPower { gamma: f64 },
    /// `f = -a(x)|t|^{γ-1} t` with `a(x) = Σ_k weight[k] x^k`.
    WeightedOddPower { gamma: f64, weight: Vec<f64> },
}

impl TermSpec {
    pub fn label(&self) -> String {
        match self {
            TermSpec::Zero => "zero".into(),
            TermSpec::OddPower { gamma } => format!("odd_power({gamma})"),
            TermSpec::WeightedOddPower { gamma, weight } => format!("weighted_odd_power({gamma}, {weight:?})"),
        }
    }
}

/// `f(λ, x, t)` together with the data of its growth bound
/// `|f| ≤ C(λ)(m₁(x) + m₂(x)|t|^γ)` and the exponent `q` of its decay at infinity.
#[derive(Clone)]
pub struct NonlinearTerm {
    name: String,
    gamma: f64,
    q: f64,
    eval: PointFn,
    d_t: Option<PointFn>,
    d_lambda: Option<PointFn>,
    c_of_lambda: ScalarFn,
    m1: ScalarFn,
    m2: ScalarFn,
}

impl fmt::Debug for NonlinearTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearTerm").field("name", &self.name).field("gamma", &self.gamma).field("q", &self.q).finish()
    }
}

fn odd_power(t: f64, gamma: f64) -> f64 {
    t.abs().powf(gamma - 1.0) * t
}

fn polynomial(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

impl NonlinearTerm {
    /// A user-supplied term; the bound defaults to `C = 1`, `m₁ = 0`, `m₂ = 1`.
    pub fn new(name: impl Into<String>, gamma: f64, q: f64, eval: PointFn) -> Self {
        Self {
            name: name.into(),
            gamma,
            q,
            eval,
            d_t: None,
            d_lambda: None,
            c_of_lambda: Arc::new(|_| 1.0),
            m1: Arc::new(|_| 0.0),
            m2: Arc::new(|_| 1.0),
        }
    }

    pub fn with_derivative(mut self, d_t: PointFn) -> Self {
        self.d_t = Some(d_t);
        self
    }

    pub fn with_lambda_derivative(mut self, d_lambda: PointFn) -> Self {
        self.d_lambda = Some(d_lambda);
        self
    }

    pub fn with_bound(mut self, c_of_lambda: ScalarFn, m1: ScalarFn, m2: ScalarFn) -> Self {
        self.c_of_lambda = c_of_lambda;
        self.m1 = m1;
        self.m2 = m2;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `γ₁ = 2n / (n + 2s - (n - 2s)γ)`, the integrability exponent claimed for `m₂`.
    pub fn gamma1(&self, params: &FracParams) -> f64 {
        let n = params.dim() as f64;
        let s = params.s();
        2.0 * n / (n + 2.0 * s - (n - 2.0 * s) * self.gamma)
    }

    pub fn eval(&self, lambda: f64, x: f64, t: f64) -> f64 {
        (self.eval)(lambda, x, t)
    }

    /// `∂_t f`, by centered differences with step `1e-6 (1 + |t|)` when no derivative was supplied.
    pub fn d_t(&self, lambda: f64, x: f64, t: f64) -> f64 {
        match &self.d_t {
            Some(d) => d(lambda, x, t),
            None => {
                let h = 1e-6 * (1.0 + t.abs());
                (self.eval(lambda, x, t + h) - self.eval(lambda, x, t - h)) / (2.0 * h)
            }
        }
    }

    /// `∂_λ f`, by centered differences when not supplied.
    pub fn d_lambda(&self, lambda: f64, x: f64, t: f64) -> f64 {
        match &self.d_lambda {
            Some(d) => d(lambda, x, t),
            None => {
                let h = 1e-6 * (1.0 + lambda.abs());
                (self.eval(lambda + h, x, t) - self.eval(lambda - h, x, t)) / (2.0 * h)
            }
        }
    }

    pub fn c_of_lambda(&self, lambda: f64) -> f64 {
        (self.c_of_lambda)(lambda)
    }

    pub fn m1(&self, x: f64) -> f64 {
        (self.m1)(x)
    }

    pub fn m2(&self, x: f64) -> f64 {
        (self.m2)(x)
    }

    /// Nodal values `f(λ, x_i, u_i)`.
    pub fn apply(&self, pair: &OperatorPair, lambda: f64, u: &DVector<f64>) -> Result<DVector<f64>> {
        Error::check_len(pair.dim(), u.len())?;
        let x = pair.grid().nodes();
        Ok(DVector::from_fn(u.len(), |i, _| self.eval(lambda, x[i], u[i])))
    }

    /// Nodal values `∂_t f(λ, x_i, u_i)`.
    pub fn apply_d_t(&self, pair: &OperatorPair, lambda: f64, u: &DVector<f64>) -> Result<DVector<f64>> {
        Error::check_len(pair.dim(), u.len())?;
        let x = pair.grid().nodes();
        Ok(DVector::from_fn(u.len(), |i, _| self.d_t(lambda, x[i], u[i])))
    }

    /// Nodal values `∂_λ f(λ, x_i, u_i)`.
    pub fn apply_d_lambda(&self, pair: &OperatorPair, lambda: f64, u: &DVector<f64>) -> Result<DVector<f64>> {
        Error::check_len(pair.dim(), u.len())?;
        let x = pair.grid().nodes();
        Ok(DVector::from_fn(u.len(), |i, _| self.d_lambda(lambda, x[i], u[i])))
    }
}

/// Growth exponent window `1 < γ < 2*(s) - 1`; `2*(s)` is infinite for `s ≥ n/2`.
pub fn check_gamma(gamma: f64, params: &FracParams) -> Result<()> {
    let upper = params.critical_exponent() - 1.0;
    if !(gamma > 1.0 && gamma < upper) {
        return Err(Error::domain(format!("growth exponent {gamma} outside (1, {upper}) for s = {}", params.s())));
    }
    Ok(())
}

/// `γ + 2` when that stays below `2*(s)`, otherwise the midpoint of `(γ + 1, 2*(s))`.
pub fn default_q(gamma: f64, params: &FracParams) -> f64 {
    let crit = params.critical_exponent();
    if gamma + 2.0 < crit { gamma + 2.0 } else { 0.5 * (gamma + 1.0 + crit) }
}

/// Builds a builtin term for the operator's order, checking the exponent window
/// and `a(x) ≥ 0` on the grid nodes.
pub fn builtin(spec: &TermSpec, pair: &OperatorPair) -> Result<NonlinearTerm> {
    let params = pair.params();
    match spec {
        TermSpec::Zero => {
            let crit = params.critical_exponent();
            let gamma = if crit - 1.0 > 3.0 { 2.0 } else { 0.5 * crit };
            let zero: PointFn = Arc::new(|_, _, _| 0.0);
            Ok(NonlinearTerm::new("zero", gamma, default_q(gamma, params), zero.clone())
                .with_derivative(zero.clone())
                .with_lambda_derivative(zero)
                .with_bound(Arc::new(|_| 0.0), Arc::new(|_| 0.0), Arc::new(|_| 0.0)))
        }
        TermSpec::OddPower { gamma } => {
            let g = *gamma;
            check_gamma(g, params)?;
            Ok(NonlinearTerm::new(spec.label(), g, default_q(g, params), Arc::new(move |_, _, t| -odd_power(t, g)))
                .with_derivative(Arc::new(move |_, _, t| -g * t.abs().powf(g - 1.0)))
                .with_lambda_derivative(Arc::new(|_, _, _| 0.0)))
        }
        TermSpec::WeightedOddPower { gamma, weight } => {
            let g = *gamma;
            check_gamma(g, params)?;
            if weight.is_empty() {
                return Err(Error::domain("weight polynomial has no coefficients"));
            }
            if let Some(x) = pair.grid().nodes().iter().find(|x| !(polynomial(weight, **x) >= 0.0)) {
                return Err(Error::Hypothesis(format!("weight a(x) is negative at x = {x}")));
            }
            let (w1, w2, w3) = (weight.clone(), weight.clone(), weight.clone());
            Ok(NonlinearTerm::new(
                spec.label(),
                g,
                default_q(g, params),
                Arc::new(move |_, x, t| -polynomial(&w1, x) * odd_power(t, g)),
            )
            .with_derivative(Arc::new(move |_, x, t| -g * polynomial(&w2, x) * t.abs().powf(g - 1.0)))
            .with_lambda_derivative(Arc::new(|_, _, _| 0.0))
            .with_bound(Arc::new(|_| 1.0), Arc::new(|_| 0.0), Arc::new(move |x| polynomial(&w3, x))))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NemytskiiImage {
    pub values: DVector<f64>,
    /// `√(gᵀ S⁻¹ g)` with `g = T · values`.
    pub dual_norm: f64,
}

pub fn nemytskii(term: &NonlinearTerm, pair: &OperatorPair, lambda: f64, u: &DVector<f64>) -> Result<NemytskiiImage> {
    let values = term.apply(pair, lambda, u)?;
    let dual_norm = pair.dual_norm(&pair.apply_mass(&values))?;
    Ok(NemytskiiImage { values, dual_norm })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LittleOReport {
    pub lambda: f64,
    pub eps: Vec<f64>,
    /// `‖F(λ, ε d)‖_{X*} / ‖ε d‖_X`.
    pub ratios: Vec<f64>,
    /// Least-squares slope of `log r` against `log ε`; absent when every ratio vanishes.
    pub slope: Option<f64>,
    pub pass: bool,
}

pub fn little_o_certificate(
    term: &NonlinearTerm,
    pair: &OperatorPair,
    lambda: f64,
    direction: &DVector<f64>,
    eps_list: &[f64],
) -> Result<LittleOReport> {
    let d_norm = pair.x_norm(direction)?;
    if !(d_norm > 0.0) {
        return Err(Error::domain("little-o direction must be nonzero"));
    }
    if eps_list.is_empty() || eps_list.iter().any(|e| !(*e > 0.0)) || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::domain("eps list must be positive and strictly decreasing"));
    }
    let ratios = eps_list
        .iter()
        .map(|&eps| Ok(nemytskii(term, pair, lambda, &(direction * eps))?.dual_norm / (eps * d_norm)))
        .collect::<Result<Vec<f64>>>()?;
    let pts: Vec<(f64, f64)> =
        eps_list.iter().zip(&ratios).filter(|(_, r)| **r > 0.0).map(|(e, r)| (e.ln(), r.ln())).collect();
    let slope = (pts.len() >= 2).then(|| {
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    let all_zero = ratios.iter().all(|r| *r == 0.0);
    let pass = all_zero || slope.is_some_and(|s| s > 0.0);
    Ok(LittleOReport { lambda, eps: eps_list.to_vec(), ratios, slope, pass })
}

/// Points at which the hypotheses are probed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSampling {
    pub lambda_samples: usize,
    /// Log-spaced magnitudes per decade-range probe, used with both signs.
    pub t_samples: usize,
    pub delta_ladder: Vec<f64>,
    pub m_ladder: Vec<f64>,
}

impl Default for HypothesisSampling {
    fn default() -> Self {
        Self {
            lambda_samples: 9,
            t_samples: 25,
            delta_ladder: vec![1e-1, 1e-2, 1e-3, 1e-4],
            m_ladder: vec![1e1, 1e2, 1e3, 1e4],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub term: String,
    pub gamma: f64,
    pub q: f64,
    pub gamma1: f64,
    pub critical_exponent: f64,
    pub exponents_in_window: bool,
    pub m2_nonnegative: bool,
    /// Largest `(|f| - C(λ)(m₁ + m₂|t|^γ)) / (1 + bound)` over the samples.
    pub growth_margin: f64,
    /// `max |f/t|` over `0 < |t| ≤ δ` for each `δ`.
    pub small_t_ladder: Vec<(f64, f64)>,
    /// `max |f| / |t|^{q-1}` over `|t| ≥ M` for each `M`.
    pub large_t_ladder: Vec<(f64, f64)>,
    pub pass: bool,
}

const GROWTH_TOL: f64 = 1e-12;

fn log_points(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let count = count.max(2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

/// A ladder tends to zero when it never increases and ends strictly below its start.
fn ladder_vanishes(ladder: &[(f64, f64)]) -> bool {
    let vals: Vec<f64> = ladder.iter().map(|p| p.1).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return false;
    }
    if vals.iter().all(|v| *v == 0.0) {
        return true;
    }
    vals.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)) && vals.last() < vals.first()
}

pub fn hypothesis_check(
    term: &NonlinearTerm,
    pair: &OperatorPair,
    lambda_box: (f64, f64),
    sampling: &HypothesisSampling,
    exec: Execution,
) -> HypothesisReport {
    let params = pair.params();
    let crit = params.critical_exponent();
    let nodes = pair.grid().nodes();
    let lambdas: Vec<f64> = if sampling.lambda_samples <= 1 {
        vec![lambda_box.0]
    } else {
        (0..sampling.lambda_samples)
            .map(|i| lambda_box.0 + (lambda_box.1 - lambda_box.0) * i as f64 / (sampling.lambda_samples - 1) as f64)
            .collect()
    };
    let magnitudes = log_points(1e-6, 1e6, sampling.t_samples * 4);

    let growth = exec.map(lambdas.len(), |li| {
        let lam = lambdas[li];
        let c = term.c_of_lambda(lam);
        let mut worst = f64::NEG_INFINITY;
        for &x in nodes {
            let (m1, m2) = (term.m1(x), term.m2(x));
            for &m in &magnitudes {
                for t in [m, -m] {
                    let bound = c * (m1 + m2 * t.abs().powf(term.gamma));
                    worst = worst.max((term.eval(lam, x, t).abs() - bound) / (1.0 + bound));
                }
            }
        }
        worst
    });
    let growth_margin = growth.into_iter().fold(f64::NEG_INFINITY, f64::max);

    let ladder = |bounds: &[f64], probe: &(dyn Fn(f64) -> Vec<f64> + Sync), score: &(dyn Fn(f64, f64, f64, f64) -> f64 + Sync)| {
        bounds
            .iter()
            .map(|&b| {
                let ts = probe(b);
                let per_lambda = exec.map(lambdas.len(), |li| {
                    let lam = lambdas[li];
                    let mut worst: f64 = 0.0;
                    for &x in nodes {
                        for &m in &ts {
                            for t in [m, -m] {
                                worst = worst.max(score(lam, x, t, term.eval(lam, x, t)));
                            }
                        }
                    }
                    worst
                });
                (b, per_lambda.into_iter().fold(0.0, f64::max))
            })
            .collect::<Vec<_>>()
    };
    let small_t_ladder = ladder(
        &sampling.delta_ladder,
        &|d| log_points(d * 1e-3, d, sampling.t_samples),
        &|_, _, t, f| (f / t).abs(),
    );
    let q = term.q;
    let large_t_ladder = ladder(
        &sampling.m_ladder,
        &|m| log_points(m, m * 1e3, sampling.t_samples),
        &|_, _, t, f| f.abs() / t.abs().powf(q - 1.0),
    );

    let exponents_in_window = term.gamma > 1.0 && term.gamma < crit - 1.0 && q > 1.0 && q < crit;
    let m2_nonnegative = nodes.iter().all(|x| term.m2(*x) >= 0.0) && lambdas.iter().all(|l| term.c_of_lambda(*l) >= 0.0);
    let pass = exponents_in_window
        && m2_nonnegative
        && growth_margin <= GROWTH_TOL
        && ladder_vanishes(&small_t_ladder)
        && ladder_vanishes(&large_t_ladder);
    HypothesisReport {
        term: term.name.clone(),
        gamma: term.gamma,
        q,
        gamma1: term.gamma1(params),
        critical_exponent: crit,
        exponents_in_window,
        m2_nonnegative,
        growth_margin,
        small_t_ladder,
        large_t_ladder,
        pass,
    }
}
