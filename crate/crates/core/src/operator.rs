//! Discrete Dirichlet fractional Laplacian on an interval.
//!
//! Two inequivalent operators are assembled on the same grid:
//!
//! * `Restricted`: collocation of the singular integral
//!   `C_{1,s} P.V. ∫ (u(x) - u(y)) |x - y|^{-1-2s} dy` with `u ≡ 0` outside
//!   `(a, b)`. The exterior part of the integral is evaluated exactly, the far
//!   field integrates the kernel against an interpolant of the nodal values,
//!   and the cell around the collocation point uses the second-difference
//!   form with a quadratic local model. See [`RestrictedScheme`].
//! * `Spectral`: fractional powers of the Dirichlet Laplacian built from the
//!   analytic sine eigenbasis.
//!
//! Both are stored as a lumped mass `T = h I` and a symmetric stiffness
//! `S = T · sym(L)`, where `L` is the collocation matrix (the pointwise
//! approximation of the operator at the nodes).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::grid::Grid1D;
use crate::inertia::TridiagonalPencil;
use crate::params::FracParams;

/// Below this distance from `s = 1/2` the logarithmic antiderivative is used.
const LOG_BRANCH_EPS: f64 = 1e-12;
/// Hat weights at integer distance at least this large use the convergent series.
const SERIES_FROM: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    Restricted,
    Spectral,
}

impl OperatorKind {
    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Restricted => "restricted",
            OperatorKind::Spectral => "spectral",
        }
    }
}

impl std::str::FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "restricted" => Ok(OperatorKind::Restricted),
            "spectral" => Ok(OperatorKind::Spectral),
            other => Err(Error::Config(format!("unknown operator kind '{other}'"))),
        }
    }
}

/// Stiffness/mass pair of a discrete fractional Laplacian.
#[derive(Debug, Clone)]
pub struct OperatorPair {
    stiffness: DMatrix<f64>,
    collocation: DMatrix<f64>,
    mass: DVector<f64>,
    kind: OperatorKind,
    grid: Grid1D,
    params: FracParams,
    tail: DVector<f64>,
    recipe: Recipe,
    cholesky: OnceLock<Cholesky<f64, Dyn>>,
    pencil: OnceLock<TridiagonalPencil>,
}

/// How a pair was assembled, so it can be rebuilt on another grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Recipe {
    Restricted(RestrictedScheme),
    /// `None` keeps every sampled mode.
    Spectral(Option<usize>),
}

/// Exact exterior contribution `∫_{R \ (a,b)} |x - y|^{-1-2s} dy` at an interior point.
pub fn exterior_tail(a: f64, b: f64, x: f64, s: f64) -> f64 {
    ((x - a).powf(-2.0 * s) + (b - x).powf(-2.0 * s)) / (2.0 * s)
}

/// First antiderivative of `t^{-1-2s}`.
fn kernel_d1(t: f64, s: f64) -> f64 {
    -t.powf(-2.0 * s) / (2.0 * s)
}

/// Second antiderivative of `t^{-1-2s}`, up to an affine function of `t`.
///
/// Written as `-(t^{1-2s} - 1) / (2s (1-2s))` through `exp_m1`, which tends
/// continuously to `-ln t / (2s)` as `s → 1/2`; the logarithmic form is
/// selected explicitly near that point.
fn kernel_d2(t: f64, s: f64) -> f64 {
    let e = 1.0 - 2.0 * s;
    if e.abs() < LOG_BRANCH_EPS {
        -t.ln() / (2.0 * s)
    } else {
        -(e * t.ln()).exp_m1() / (2.0 * s * e)
    }
}

/// `∫ hat(t - m) t^{-1-2s} dt` for an integer distance `m >= 2` (in units of `h`).
fn hat_weight(m: usize, s: f64) -> f64 {
    debug_assert!(m >= 2);
    if m >= SERIES_FROM {
        return hat_weight_series(m as f64, s);
    }
    let m = m as f64;
    kernel_d2(m + 1.0, s) - 2.0 * kernel_d2(m, s) + kernel_d2(m - 1.0, s)
}

/// `m^{-p} Σ_k binom(-p, 2k) m^{-2k} 2/((2k+1)(2k+2))` with `p = 1 + 2s`.
fn hat_weight_series(m: f64, s: f64) -> f64 {
    let p = 1.0 + 2.0 * s;
    let inv_m2 = 1.0 / (m * m);
    let mut binom = 1.0;
    let mut scale = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        let j = (2 * k - 2) as f64;
        binom *= (-p - j) / (j + 1.0) * (-p - j - 1.0) / (j + 2.0);
        scale *= inv_m2;
        let kf = k as f64;
        let term = binom * scale * 2.0 / ((2.0 * kf + 1.0) * (2.0 * kf + 2.0));
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    m.powf(-p) * sum
}

/// Weight coupling nearest neighbours: the quadratic near-cell model plus the
/// far-field part of the neighbour's hat on `[h, 2h]`.
fn neighbour_weight(s: f64) -> f64 {
    let near = 1.0 / (2.0 - 2.0 * s);
    let far = kernel_d2(2.0, s) - kernel_d2(1.0, s) - kernel_d1(1.0, s);
    near + far
}

/// Contribution of the half hat of a boundary node whose support lies at
/// distances `[lower, lower + 1]` (in units of `h`).
fn boundary_hat_weight(lower: usize, s: f64) -> f64 {
    if lower == 0 {
        return 1.0 / (2.0 - 2.0 * s);
    }
    let l = lower as f64;
    kernel_d1(l + 1.0, s) - (kernel_d2(l + 1.0, s) - kernel_d2(l, s))
}

/// Dimensionless interaction weights indexed by node distance (entry 0 unused).
fn distance_weights(n: usize, s: f64) -> Result<Vec<f64>> {
    let mut w = vec![0.0; n];
    if n > 1 {
        w[1] = neighbour_weight(s);
    }
    for (m, slot) in w.iter_mut().enumerate().skip(2) {
        *slot = hat_weight(m, s);
    }
    if let Some(m) = w.iter().skip(1).position(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Assembly(format!(
            "kernel weight at distance {} is {} for s = {s}",
            m + 1,
            w[m + 1]
        )));
    }
    Ok(w)
}

/// Interpolant used for the far field of the restricted operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestrictedScheme {
    /// `u_h = ρ · I_h[u / ρ]` with `ρ = ((x-a)(b-x))^s`, so the interpolant
    /// carries the `dist^s` boundary behaviour of Dirichlet solutions. Cell
    /// integrals are evaluated by (graded) Gauss-Legendre quadrature.
    #[default]
    BoundaryWeighted,
    /// Plain piecewise-linear interpolant; every weight is a closed-form
    /// power (or logarithmic, at `s = 1/2`) antiderivative.
    LinearHat,
}

/// Assembles the singular-integral operator with zero exterior data using the default scheme.
pub fn assemble_restricted(grid: &Grid1D, params: &FracParams) -> Result<OperatorPair> {
    assemble_restricted_with(grid, params, RestrictedScheme::default(), Execution::default())
}

pub fn assemble_restricted_with(
    grid: &Grid1D,
    params: &FracParams,
    scheme: RestrictedScheme,
    exec: Execution,
) -> Result<OperatorPair> {
    let n = grid.len();
    let s = params.s();
    let tail = DVector::from_iterator(n, grid.nodes().iter().map(|&x| exterior_tail(grid.a(), grid.b(), x, s)));
    let rows = match scheme {
        RestrictedScheme::LinearHat => linear_hat_rows(grid, params, &tail, exec)?,
        RestrictedScheme::BoundaryWeighted => weighted::rows(grid, params, &tail, exec),
    };
    let mut collocation = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            collocation[(i, j)] = *v;
        }
    }
    if collocation.iter().any(|v| !v.is_finite()) {
        return Err(Error::Assembly("non-finite operator entry".into()));
    }
    let mass = DVector::from_element(n, grid.h());
    let stiffness = symmetrize(&(&collocation * grid.h()));
    Ok(OperatorPair::from_parts(
        stiffness,
        collocation,
        mass,
        Recipe::Restricted(scheme),
        grid.clone(),
        *params,
        tail,
    ))
}

fn linear_hat_rows(grid: &Grid1D, params: &FracParams, tail: &DVector<f64>, exec: Execution) -> Result<Vec<Vec<f64>>> {
    let n = grid.len();
    let s = params.s();
    let scale = params.c_ns() * grid.h().powf(-2.0 * s);
    let weights = distance_weights(n, s)?;
    Ok(exec.map(n, |i| {
        let mut row = vec![0.0; n];
        let mut coupling = 0.0;
        for (j, slot) in row.iter_mut().enumerate() {
            if j != i {
                let w = weights[i.abs_diff(j)];
                *slot = -scale * w;
                coupling += w;
            }
        }
        let boundary = boundary_hat_weight(i, s) + boundary_hat_weight(n - 1 - i, s);
        row[i] = scale * (coupling + boundary) + params.c_ns() * tail[i];
        row
    }))
}

/// Boundary-weighted collocation rows.
mod weighted {
    use super::*;
    use crate::quadrature::{integrate_graded, rule, Grading};

    /// Interval geometry shared by all rows.
    struct Geometry {
        a: f64,
        b: f64,
        h: f64,
        s: f64,
        n: usize,
    }

    impl Geometry {
        /// `x_k` for `k = 0..=n+1`, with `x_0 = a` and `x_{n+1} = b` (1-based nodes).
        fn x(&self, k: usize) -> f64 {
            if k == self.n + 1 {
                self.b
            } else {
                self.a + k as f64 * self.h
            }
        }

        fn rho(&self, y: f64) -> f64 {
            ((y - self.a).max(0.0) * (self.b - y).max(0.0)).powf(self.s)
        }
    }

    /// `(P - M, P + M - 2ρ(x))` for `P = ρ(x+y)`, `M = ρ(x-y)`, evaluated
    /// without cancellation for small `y` by a fourth-order Taylor expansion.
    fn differences(g: &Geometry, x: f64, rho_x: f64, y: f64) -> (f64, f64) {
        let p = x - g.a;
        let q = g.b - x;
        if y < 1e-3 * p.min(q) {
            let s = g.s;
            let l1 = 1.0 / p - 1.0 / q;
            let l2 = -1.0 / (p * p) - 1.0 / (q * q);
            let l3 = 2.0 / p.powi(3) - 2.0 / q.powi(3);
            let l4 = -6.0 / p.powi(4) - 6.0 / q.powi(4);
            let (g1, g2, g3, g4) = (s * l1, s * l2, s * l3, s * l4);
            let f1 = g1;
            let f2 = g2 + g1 * g1;
            let f3 = g3 + 3.0 * g1 * g2 + g1.powi(3);
            let f4 = g4 + 4.0 * g1 * g3 + 3.0 * g2 * g2 + 6.0 * g1 * g1 * g2 + g1.powi(4);
            let y2 = y * y;
            let d1 = rho_x * y * (2.0 * f1 + f3 * y2 / 3.0);
            let d2 = rho_x * y2 * (f2 + f4 * y2 / 12.0);
            (d1, d2)
        } else {
            let plus = g.rho(x + y);
            let minus = g.rho(x - y);
            (plus - minus, plus + minus - 2.0 * rho_x)
        }
    }

    pub(super) fn rows(grid: &Grid1D, params: &FracParams, tail: &DVector<f64>, exec: Execution) -> Vec<Vec<f64>> {
        let n = grid.len();
        let g = Geometry { a: grid.a(), b: grid.b(), h: grid.h(), s: params.s(), n };
        let rho_nodes: Vec<f64> = (1..=n).map(|k| g.rho(g.x(k))).collect();
        let cells = interior_cells(&g, &rho_nodes);
        let kernel = kernel_table(&g);
        let c = params.c_ns();

        exec.map(n, |i| {
            let mut row = vec![0.0; n];
            let mut diag = c * tail[i];
            let xi = g.x(i + 1);

            // Interior far cells [x_k, x_{k+1}], k = 1..n-1 (1-based), skipping the two touching x_i.
            for (k, cell) in cells.iter().enumerate() {
                let left = k; // 0-based node at the left end
                if left == i || left + 1 == i {
                    continue;
                }
                let offset = k as isize - i as isize; // cell start relative to x_i, in units of h
                let kv = &kernel[(offset + n as isize) as usize];
                let mut wl = 0.0;
                let mut wr = 0.0;
                let mut rem = 0.0;
                for (q, &kq) in kv.iter().enumerate() {
                    wl += cell.theta_left[q] * kq;
                    wr += cell.theta_right[q] * kq;
                    rem += cell.remainder[q] * kq;
                }
                row[left] -= c * wl;
                row[left + 1] -= c * wr;
                diag += c * (wl + wr + rem);
            }

            // Boundary cells: v is extended by a constant across [a, x_1] and [x_n, b].
            let kernel_at = |y: f64| (xi - y).abs().powf(-1.0 - 2.0 * g.s);
            if i != 0 {
                let r0 = rho_nodes[0];
                let [w, rem] = integrate_graded(
                    &|y: f64| {
                        let k = kernel_at(y);
                        let ratio = g.rho(y) / r0;
                        [ratio * k, (1.0 - ratio) * k]
                    },
                    g.a,
                    g.x(1),
                    Grading::Low,
                );
                row[0] -= c * w;
                diag += c * (w + rem);
            }
            if i != n - 1 {
                let rn = rho_nodes[n - 1];
                let [w, rem] = integrate_graded(
                    &|y: f64| {
                        let k = kernel_at(y);
                        let ratio = g.rho(y) / rn;
                        [ratio * k, (1.0 - ratio) * k]
                    },
                    g.x(n),
                    g.b,
                    Grading::High,
                );
                row[n - 1] -= c * w;
                diag += c * (w + rem);
            }

            // Near cell: second-difference form with u = ρ q, q the quadratic
            // interpolant of u/ρ through the neighbours.
            let rho_i = rho_nodes[i];
            let h = g.h;
            let [cl, ci, cr] = integrate_graded(
                &|y: f64| {
                    let t = y / h;
                    let (d1, d2) = differences(&g, xi, rho_i, y);
                    let sum = d2 + 2.0 * rho_i;
                    let k = y.powf(-1.0 - 2.0 * g.s);
                    [
                        -0.5 * (sum * t * t - d1 * t) * k,
                        (sum * t * t - d2) * k,
                        -0.5 * (sum * t * t + d1 * t) * k,
                    ]
                },
                0.0,
                h,
                Grading::Both,
            );
            diag += c * ci / rho_i;
            if i == 0 {
                diag += c * cl / rho_i;
            } else {
                row[i - 1] += c * cl / rho_nodes[i - 1];
            }
            if i == n - 1 {
                diag += c * cr / rho_i;
            } else {
                row[i + 1] += c * cr / rho_nodes[i + 1];
            }
            row[i] += diag;
            row
        })
    }

    /// Quadrature data on the interior cells `[x_k, x_{k+1}]`, `k = 1..n-1`.
    struct Cell {
        theta_left: Vec<f64>,
        theta_right: Vec<f64>,
        remainder: Vec<f64>,
    }

    fn interior_cells(g: &Geometry, rho_nodes: &[f64]) -> Vec<Cell> {
        let (nodes, weights) = rule();
        let half = 0.5 * g.h;
        (1..g.n)
            .map(|k| {
                let lo = g.x(k);
                let hi = g.x(k + 1);
                let mut cell = Cell {
                    theta_left: Vec::with_capacity(nodes.len()),
                    theta_right: Vec::with_capacity(nodes.len()),
                    remainder: Vec::with_capacity(nodes.len()),
                };
                for (t, w) in nodes.iter().zip(weights) {
                    let y = lo + half * (1.0 + t);
                    let r = g.rho(y);
                    let tl = r * (hi - y) / (g.h * rho_nodes[k - 1]);
                    let tr = r * (y - lo) / (g.h * rho_nodes[k]);
                    let scale = w * half;
                    cell.theta_left.push(scale * tl);
                    cell.theta_right.push(scale * tr);
                    cell.remainder.push(scale * (1.0 - tl - tr));
                }
                cell
            })
            .collect()
    }

    /// Kernel values at the rule points of a cell starting `offset` nodes
    /// from the collocation point, indexed by `offset + n`.
    fn kernel_table(g: &Geometry) -> Vec<Vec<f64>> {
        let (nodes, _) = rule();
        let n = g.n as isize;
        (-n..=n)
            .map(|offset| {
                if offset == 0 || offset == -1 {
                    return Vec::new();
                }
                nodes
                    .iter()
                    .map(|t| {
                        let d = (offset as f64 + 0.5 * (1.0 + t)) * g.h;
                        d.abs().powf(-1.0 - 2.0 * g.s)
                    })
                    .collect()
            })
            .collect()
    }
}

/// Analytic Dirichlet eigenvalue `(kπ/(b-a))²` of `-d²/dx²`.
pub fn dirichlet_eigenvalue(grid: &Grid1D, k: usize) -> f64 {
    let w = k as f64 * PI / grid.width();
    w * w
}

/// Assembles the spectral operator from the first `modes` sine modes.
///
/// Retained modes get the exact eigenvalue `μ_k^s`; the `T`-orthogonal
/// complement spanned by the remaining sampled modes is assigned
/// `μ_{modes+1}^s`, which keeps `S` positive definite.
pub fn assemble_spectral(grid: &Grid1D, params: &FracParams, modes: usize) -> Result<OperatorPair> {
    let n = grid.len();
    if modes == 0 || modes > n {
        return Err(Error::Rank { requested: modes, available: n });
    }
    let h = grid.h();
    let s = params.s();
    let norm = (2.0 / grid.width()).sqrt();

    let mut basis = DMatrix::from_fn(n, n, |i, k| {
        norm * ((k + 1) as f64 * PI * (grid.nodes()[i] - grid.a()) / grid.width()).sin()
    });
    orthonormalize_columns(&mut basis, h)?;

    let cap = dirichlet_eigenvalue(grid, modes + 1).powf(s);
    let scaled = DMatrix::from_fn(n, n, |i, k| {
        let mu = if k < modes { dirichlet_eigenvalue(grid, k + 1).powf(s) } else { cap };
        basis[(i, k)] * h * mu
    });
    // S = T Ψ D Ψᵀ T
    let stiffness = symmetrize(&(&scaled * basis.transpose() * h));
    let collocation = &stiffness / h;
    let mass = DVector::from_element(n, h);
    Ok(OperatorPair::from_parts(
        stiffness,
        collocation,
        mass,
        Recipe::Spectral((modes < n).then_some(modes)),
        grid.clone(),
        *params,
        DVector::zeros(n),
    ))
}

/// Modified Gram-Schmidt in the lumped-mass inner product `h xᵀy`.
fn orthonormalize_columns(basis: &mut DMatrix<f64>, h: f64) -> Result<()> {
    for k in 0..basis.ncols() {
        for j in 0..k {
            let proj = h * basis.column(j).dot(&basis.column(k));
            let cj = basis.column(j).clone_owned();
            basis.column_mut(k).axpy(-proj, &cj, 1.0);
        }
        let len = (h * basis.column(k).norm_squared()).sqrt();
        if len < 1e-12 {
            return Err(Error::Rank { requested: k + 1, available: k });
        }
        basis.column_mut(k).unscale_mut(len);
    }
    Ok(())
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

impl OperatorPair {
    fn from_parts(
        stiffness: DMatrix<f64>,
        collocation: DMatrix<f64>,
        mass: DVector<f64>,
        recipe: Recipe,
        grid: Grid1D,
        params: FracParams,
        tail: DVector<f64>,
    ) -> Self {
        let kind = match recipe {
            Recipe::Restricted(_) => OperatorKind::Restricted,
            Recipe::Spectral(_) => OperatorKind::Spectral,
        };
        Self {
            stiffness,
            collocation,
            mass,
            kind,
            grid,
            params,
            tail,
            recipe,
            cholesky: OnceLock::new(),
            pencil: OnceLock::new(),
        }
    }

    /// Assembles the same operator (kind, scheme, retained modes) on `(a, b)` with `n` nodes.
    pub fn rebuild(&self, n: usize) -> Result<Self> {
        let grid = Grid1D::new(self.grid.a(), self.grid.b(), n)?;
        match self.recipe {
            Recipe::Restricted(scheme) => assemble_restricted_with(&grid, &self.params, scheme, Execution::default()),
            Recipe::Spectral(None) => assemble_spectral(&grid, &self.params, n),
            Recipe::Spectral(Some(m)) => assemble_spectral(&grid, &self.params, m.min(n)),
        }
    }

    pub fn build(kind: OperatorKind, grid: &Grid1D, params: &FracParams) -> Result<Self> {
        match kind {
            OperatorKind::Restricted => assemble_restricted(grid, params),
            OperatorKind::Spectral => assemble_spectral(grid, params, grid.len()),
        }
    }

    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    /// Diagonal of the lumped mass matrix `T`.
    pub fn mass_diag(&self) -> &DVector<f64> {
        &self.mass
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn params(&self) -> &FracParams {
        &self.params
    }

    /// Exterior tails `τ_i` (without the normalization constant). Zero for the spectral kind.
    pub fn tail(&self) -> &DVector<f64> {
        &self.tail
    }

    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    /// `uᵀ S v`.
    pub fn energy(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        Error::check_len(self.dim(), u.len())?;
        Error::check_len(self.dim(), v.len())?;
        Ok(u.dot(&(&self.stiffness * v)))
    }

    /// `uᵀ T v`.
    pub fn mass(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        Error::check_len(self.dim(), u.len())?;
        Error::check_len(self.dim(), v.len())?;
        Ok(u.iter().zip(v.iter()).zip(self.mass.iter()).map(|((a, b), t)| a * b * t).sum())
    }

    /// `T u`.
    pub fn apply_mass(&self, u: &DVector<f64>) -> DVector<f64> {
        u.component_mul(&self.mass)
    }

    /// Collocation matrix `L`: row `i` approximates `(-Δ)^s u (x_i)`.
    /// Symmetric for the linear-hat and spectral operators; for the
    /// boundary-weighted scheme only its symmetric part enters `S`.
    pub fn collocation(&self) -> &DMatrix<f64> {
        &self.collocation
    }

    /// Pointwise approximation `L u` of `(-Δ)^s u` at the nodes.
    pub fn apply_collocation(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        Error::check_len(self.dim(), u.len())?;
        Ok(&self.collocation * u)
    }

    /// Symmetric operator form `T⁻¹ S u`.
    pub fn apply_operator(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        Error::check_len(self.dim(), u.len())?;
        Ok((&self.stiffness * u).component_div(&self.mass))
    }

    /// Discrete X-norm `√(uᵀ S u)`.
    pub fn x_norm(&self, u: &DVector<f64>) -> Result<f64> {
        Ok(self.energy(u, u)?.max(0.0).sqrt())
    }

    pub(crate) fn cholesky(&self) -> Result<&Cholesky<f64, Dyn>> {
        if let Some(c) = self.cholesky.get() {
            return Ok(c);
        }
        let c = Cholesky::new(self.stiffness.clone())
            .ok_or_else(|| Error::numerical("stiffness matrix is not positive definite"))?;
        Ok(self.cholesky.get_or_init(|| c))
    }

    /// Tridiagonal form of the pencil `(S, T)`, computed once.
    pub fn pencil(&self) -> &TridiagonalPencil {
        self.pencil.get_or_init(|| TridiagonalPencil::new(&self.stiffness, &self.mass))
    }

    /// Solves `S x = rhs`.
    pub fn solve_stiffness(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        Error::check_len(self.dim(), rhs.len())?;
        Ok(self.cholesky()?.solve(rhs))
    }

    /// Discrete dual norm `√(gᵀ S⁻¹ g)`.
    pub fn dual_norm(&self, g: &DVector<f64>) -> Result<f64> {
        let x = self.solve_stiffness(g)?;
        Ok(g.dot(&x).max(0.0).sqrt())
    }

    /// Returns a copy whose `(i, j)` coupling is replaced by a repulsive one of
    /// `factor` times the largest diagonal entry. Used only to check that the
    /// verification suites detect a broken operator.
    #[doc(hidden)]
    pub fn with_corrupted_weight(&self, i: usize, j: usize, factor: f64) -> Self {
        let mut out = self.clone();
        out.cholesky = OnceLock::new();
        out.pencil = OnceLock::new();
        let big = self.stiffness.diagonal().max() * factor;
        out.stiffness[(i, j)] = big;
        out.stiffness[(j, i)] = big;
        out.collocation[(i, j)] = big / self.mass[i];
        out.collocation[(j, i)] = big / self.mass[j];
        out
    }
}
