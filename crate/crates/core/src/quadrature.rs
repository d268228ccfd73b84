//! Gauss-Legendre rules and geometrically graded composite integration for
//! integrands with algebraic endpoint singularities.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, computed by Newton iteration
/// on the three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

pub const RULE_POINTS: usize = 10;

/// Cached rule with [`RULE_POINTS`] points.
pub fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(RULE_POINTS))
}

/// Integrates a `K`-vector valued function over `[lo, hi]` with a single rule.
pub fn integrate<const K: usize>(f: &impl Fn(f64) -> [f64; K], lo: f64, hi: f64) -> [f64; K] {
    let (x, w) = rule();
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let mut acc = [0.0; K];
    for (xi, wi) in x.iter().zip(w) {
        let v = f(mid + half * xi);
        for k in 0..K {
            acc[k] += wi * v[k];
        }
    }
    for a in acc.iter_mut() {
        *a *= half;
    }
    acc
}

/// Which endpoints of the interval carry an integrable singularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grading {
    Low,
    High,
    Both,
}

/// Smallest graded piece relative to the interval length.
const GRADING_FLOOR: f64 = 1e-18;

/// Composite rule on pieces halving toward the singular endpoint(s). The
/// final piece touching a singular endpoint is dropped once it is below
/// `GRADING_FLOOR` times the interval length.
pub fn integrate_graded<const K: usize>(
    f: &impl Fn(f64) -> [f64; K],
    lo: f64,
    hi: f64,
    grading: Grading,
) -> [f64; K] {
    let mut acc = [0.0; K];
    let mut add = |v: [f64; K]| {
        for k in 0..K {
            acc[k] += v[k];
        }
    };
    let len = hi - lo;
    match grading {
        Grading::Low => graded_toward_low(f, lo, hi, len, &mut add),
        Grading::High => graded_toward_high(f, lo, hi, len, &mut add),
        Grading::Both => {
            let mid = 0.5 * (lo + hi);
            graded_toward_low(f, lo, mid, len, &mut add);
            graded_toward_high(f, mid, hi, len, &mut add);
        }
    }
    acc
}

fn graded_toward_low<const K: usize>(
    f: &impl Fn(f64) -> [f64; K],
    lo: f64,
    hi: f64,
    total: f64,
    add: &mut impl FnMut([f64; K]),
) {
    let mut right = hi;
    let mut width = 0.5 * (hi - lo);
    while width > GRADING_FLOOR * total {
        add(integrate(f, lo + width, right));
        right = lo + width;
        width *= 0.5;
    }
}

fn graded_toward_high<const K: usize>(
    f: &impl Fn(f64) -> [f64; K],
    lo: f64,
    hi: f64,
    total: f64,
    add: &mut impl FnMut([f64; K]),
) {
    let mut left = lo;
    let mut width = 0.5 * (hi - lo);
    while width > GRADING_FLOOR * total {
        add(integrate(f, left, hi - width));
        left = hi - width;
        width *= 0.5;
    }
}
