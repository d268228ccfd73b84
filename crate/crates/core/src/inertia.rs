//! Sylvester inertia of symmetric matrices and pencils.
//!
//! A symmetric matrix is reduced once to tridiagonal form by orthogonal
//! similarity; the number of negative pivots of `LDLᵀ` of the shifted
//! tridiagonal then counts eigenvalues below the shift.

use nalgebra::linalg::SymmetricTridiagonal;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inertia {
    pub negative: usize,
    pub zero: usize,
    pub positive: usize,
}

impl Inertia {
    /// Sign of the determinant: `(-1)^negative`, or 0 when singular.
    pub fn det_sign(&self) -> i32 {
        if self.zero > 0 {
            0
        } else if self.negative.is_multiple_of(2) {
            1
        } else {
            -1
        }
    }
}

/// Tridiagonal form of `T^{-1/2} A T^{-1/2}` for a symmetric `A` and positive diagonal `T`.
#[derive(Debug, Clone)]
pub struct TridiagonalPencil {
    diag: Vec<f64>,
    off_sq: Vec<f64>,
}

impl TridiagonalPencil {
    pub fn new(a: &DMatrix<f64>, mass: &DVector<f64>) -> Self {
        let scale: Vec<f64> = mass.iter().map(|t| 1.0 / t.sqrt()).collect();
        let scaled = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * scale[i] * scale[j]);
        let (diag, off) = SymmetricTridiagonal::new(scaled).unpack_tridiagonal();
        Self { diag: diag.iter().copied().collect(), off_sq: off.iter().map(|e| e * e).collect() }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Number of pencil eigenvalues strictly below `shift`.
    pub fn count_below(&self, shift: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut q = 1.0;
        for (i, d) in self.diag.iter().enumerate() {
            q = if i == 0 { d - shift } else { d - shift - self.off_sq[i - 1] / q };
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest pencil eigenvalue (1-based) by Sturm bisection.
    pub fn eigenvalue(&self, k: usize) -> Option<f64> {
        if k == 0 || k > self.dim() {
            return None;
        }
        let n = self.dim();
        let off = |i: usize| if i < n - 1 { self.off_sq[i].sqrt() } else { 0.0 };
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = off(i) + if i > 0 { off(i - 1) } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
                break;
            }
            if self.count_below(mid) >= k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }

    /// Inertia of the shifted pencil `A - shift T`, with eigenvalues within
    /// `tol` of `shift` counted as zero.
    pub fn inertia(&self, shift: f64, tol: f64) -> Inertia {
        let below = self.count_below(shift - tol);
        let upto = self.count_below(shift + tol);
        Inertia { negative: below, zero: upto - below, positive: self.dim() - upto }
    }
}

/// Inertia of a symmetric matrix scaled by a positive diagonal (congruence
/// preserves inertia), with eigenvalues of the scaled matrix within `tol` of 0 counted as zero.
pub fn symmetric_inertia(a: &DMatrix<f64>, mass: &DVector<f64>, tol: f64) -> Inertia {
    TridiagonalPencil::new(a, mass).inertia(0.0, tol)
}
