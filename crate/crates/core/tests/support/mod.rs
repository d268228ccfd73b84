//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's numerics.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use std::f64::consts::PI;

/// Principal eigenvalues of the restricted operator on (-1, 1), frozen from
/// [`jacobi_galerkin_lambda1`] with 80 even modes.
pub const PINNED_LAMBDA1: [(f64, f64); 4] =
    [(0.3, 0.991225799), (0.4, 1.0574858923), (0.5, 1.1577738837), (0.75, 1.597503545650)];

pub fn pinned_lambda1(s: f64) -> f64 {
    PINNED_LAMBDA1.iter().find(|p| p.0 == s).expect("pinned order").1
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Lanczos approximation with reflection for `x < 1/2`.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
}

pub fn normalization_constant_1d(s: f64) -> f64 {
    s * 4f64.powf(s) * gamma(0.5 + s) / (PI.sqrt() * gamma(1.0 - s))
}

/// Gauss-Jacobi nodes and weights for `(1-x)^α (1+x)^β` by Golub-Welsch.
pub fn gauss_jacobi(m: usize, alpha: f64, beta: f64) -> (Vec<f64>, Vec<f64>) {
    let ab = alpha + beta;
    let mut j = DMatrix::<f64>::zeros(m, m);
    for k in 0..m {
        let kf = k as f64;
        let denom = (2.0 * kf + ab) * (2.0 * kf + ab + 2.0);
        j[(k, k)] = if denom == 0.0 { (beta - alpha) / (ab + 2.0) } else { (beta * beta - alpha * alpha) / denom };
        if k + 1 < m {
            let n = kf + 1.0;
            let c = 2.0 * n + ab;
            let b2 = 4.0 * n * (n + alpha) * (n + beta) * (n + ab) / (c * c * (c + 1.0) * (c - 1.0));
            j[(k, k + 1)] = b2.sqrt();
            j[(k + 1, k)] = b2.sqrt();
        }
    }
    let mu0 = 2f64.powf(ab + 1.0) * gamma(alpha + 1.0) * gamma(beta + 1.0) / gamma(ab + 2.0);
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> =
        (0..m).map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// `P_0 .. P_{deg}` of the Jacobi family `(a, a)` at `x`.
pub fn jacobi_p(deg: usize, a: f64, x: f64) -> Vec<f64> {
    let mut p = vec![1.0; deg + 1];
    if deg >= 1 {
        p[1] = (a + 1.0) + (2.0 * a + 2.0) * (x - 1.0) / 2.0;
    }
    for n in 1..deg {
        let nf = n as f64;
        let c = 2.0 * nf + 2.0 * a;
        let lhs = 2.0 * (nf + 1.0) * (nf + 2.0 * a + 1.0) * c;
        p[n + 1] = ((c + 1.0) * (c + 2.0) * c * x * p[n] - 2.0 * (nf + a) * (nf + a) * (c + 2.0) * p[n - 1]) / lhs;
    }
    p
}

/// `λ₁` on (-1, 1) from the exact images
/// `(-Δ)^s[(1-x²)^s P_n] = Γ(2s+n+1)/n! · P_n` of the weighted Jacobi basis,
/// with Galerkin test functions `(1-x²)^s P_m` and even `n < 2 modes`.
pub fn jacobi_galerkin_lambda1(s: f64, modes: usize) -> f64 {
    let degs: Vec<usize> = (0..modes).map(|i| 2 * i).collect();
    let top = *degs.last().unwrap();
    let (xq, wq) = gauss_jacobi(top + 8, 2.0 * s, 2.0 * s);
    let table: Vec<Vec<f64>> = xq.iter().map(|&x| jacobi_p(top, s, x)).collect();
    let mut ln_fact = vec![0.0; top + 1];
    for n in 1..=top {
        ln_fact[n] = ln_fact[n - 1] + (n as f64).ln();
    }
    let ln_gamma = |x: f64| gamma(x).ln();
    let stiff: Vec<f64> = degs
        .iter()
        .map(|&n| {
            let nf = n as f64;
            // κ_n h_n with h_n = 2^{2s+1} Γ(n+s+1)² / ((2n+2s+1) Γ(n+2s+1) n!)
            let ln_kappa = ln_gamma_big(2.0 * s + nf + 1.0, &ln_gamma) - ln_fact[n];
            let ln_h = (2.0 * s + 1.0) * 2f64.ln() + 2.0 * ln_gamma_big(nf + s + 1.0, &ln_gamma)
                - (2.0 * nf + 2.0 * s + 1.0).ln()
                - ln_gamma_big(nf + 2.0 * s + 1.0, &ln_gamma)
                - ln_fact[n];
            (ln_kappa + ln_h).exp()
        })
        .collect();
    let m = degs.len();
    let mut b = DMatrix::<f64>::zeros(m, m);
    for (q, row) in table.iter().enumerate() {
        for i in 0..m {
            for j in 0..=i {
                b[(i, j)] += wq[q] * row[degs[i]] * row[degs[j]];
            }
        }
    }
    for i in 0..m {
        for j in 0..i {
            b[(j, i)] = b[(i, j)];
        }
    }
    // K c = λ B c with K diagonal: the largest eigenvalue of K^{-1/2} B K^{-1/2} is 1/λ₁.
    let scaled = DMatrix::from_fn(m, m, |i, j| b[(i, j)] / (stiff[i] * stiff[j]).sqrt());
    let top_mu = SymmetricEigen::new(scaled).eigenvalues.max();
    1.0 / top_mu
}

/// `ln Γ` by recurrence into the range where the Lanczos formula does not overflow.
fn ln_gamma_big(x: f64, ln_gamma: &dyn Fn(f64) -> f64) -> f64 {
    let mut x = x;
    let mut acc = 0.0;
    while x > 100.0 {
        x -= 1.0;
        acc += x.ln();
    }
    acc + ln_gamma(x)
}

/// Double-exponential quadrature of `f` on `(a, b)`, robust to endpoint singularities.
pub fn tanh_sinh(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let r = 0.5 * (b - a);
    let h = 1.0 / 64.0;
    let mut sum = 0.0;
    for k in -384i32..=384 {
        let t = k as f64 * h;
        let u = 0.5 * PI * t.sinh();
        let x = u.tanh();
        let w = 0.5 * PI * t.cosh() / u.cosh().powi(2);
        // distance to the nearer endpoint, computed without cancellation
        let gap = r / (u.abs().exp() * u.cosh());
        let point = if x >= 0.0 { b - gap } else { a + gap };
        // nodes this close to an endpoint carry no weight for integrable singularities
        if gap > 1e-100 * r && point > a && point < b {
            sum += w * f(point);
        }
    }
    sum * r * h
}

pub fn profile(s: f64, x: f64) -> f64 {
    if x.abs() >= 1.0 { 0.0 } else { (1.0 - x * x).powf(s) }
}

/// Taylor coefficients of `(1 + v₁t + v₂t²)^s` by Miller's power recurrence.
fn power_series(v1: f64, v2: f64, s: f64, terms: usize) -> Vec<f64> {
    let v = [1.0, v1, v2];
    let mut w = vec![0.0; terms];
    w[0] = 1.0;
    for n in 1..terms {
        let nf = n as f64;
        w[n] = (1..=n.min(2)).map(|k| ((s + 1.0) * k as f64 - nf) * v[k] * w[n - k]).sum::<f64>() / nf;
    }
    w
}

/// `(-Δ)^s (1-x²)_+^s` at interior `x` as `C ∫_0^∞ (2u(x) - u(x+t) - u(x-t)) t^{-1-2s} dt`.
/// On `(0, δ)` the second difference is integrated term by term from its Taylor
/// series, avoiding cancellation; the rest is split at the kinks `t = 1 ∓ |x|`,
/// with the far tail in closed form.
pub fn profile_image_pv(s: f64, x: f64) -> f64 {
    let u = |y: f64| profile(s, y);
    let g = |t: f64| (2.0 * u(x) - u(x + t) - u(x - t)) * t.powf(-1.0 - 2.0 * s);
    let (d1, d2) = (1.0 - x.abs(), 1.0 + x.abs());
    let delta = 0.25 * d1;
    let a = 1.0 - x * x;
    // u(x ± t) = a^s (1 ∓ (2x/a) t - t²/a)^s; odd powers cancel in the sum
    let w = power_series(-2.0 * x / a, -1.0 / a, s, 80);
    let taylor: f64 = (2..w.len())
        .step_by(2)
        .map(|n| -2.0 * a.powf(s) * w[n] * delta.powf(n as f64 - 2.0 * s) / (n as f64 - 2.0 * s))
        .sum();
    let near = tanh_sinh(g, delta, d1);
    let mid = tanh_sinh(g, d1, d2);
    let far = 2.0 * u(x) * d2.powf(-2.0 * s) / (2.0 * s);
    normalization_constant_1d(s) * (taylor + near + mid + far)
}

/// `Σ h φ⁴` for the mass-normalized vector `phi`, summed in order.
pub fn quartic_mass(h: f64, phi: &[f64]) -> f64 {
    phi.iter().map(|p| h * p.powi(4)).sum()
}

/// Sign of the determinant of a small dense matrix by Gaussian elimination with partial pivoting.
pub fn det_sign(mut a: DMatrix<f64>) -> i32 {
    let n = a.nrows();
    let mut sign = 1;
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[(i, k)].abs().total_cmp(&a[(j, k)].abs())).unwrap();
        if a[(p, k)] == 0.0 {
            return 0;
        }
        if p != k {
            a.swap_rows(p, k);
            sign = -sign;
        }
        if a[(k, k)] < 0.0 {
            sign = -sign;
        }
        for i in k + 1..n {
            let f = a[(i, k)] / a[(k, k)];
            for j in k..n {
                a[(i, j)] -= f * a[(k, j)];
            }
        }
    }
    sign
}

/// `Σ_{i<j} w_ij [(u_i - u_j)² - (v_i - v_j)(u_i²/v_i - u_j²/v_j)]` with `w_ij = -S_ij`.
pub fn pairwise_sum(stiffness: &DMatrix<f64>, u: &[f64], v: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..u.len() {
        for j in i + 1..u.len() {
            let w = -stiffness[(i, j)];
            total += w * ((u[i] - u[j]).powi(2) - (v[i] - v[j]) * (u[i] * u[i] / v[i] - u[j] * u[j] / v[j]));
        }
    }
    total
}
