//! Small dense complex linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const LOG2_E: f64 = std::f64::consts::LOG2_E;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Squared Frobenius norm.
#[inline]
pub fn frob_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Real part of the trace (trace of a Hermitian product is real up to rounding).
#[inline]
pub fn trace_re(m: &CMatrix) -> f64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)].re).sum()
}

/// tr(G G^H) = squared Frobenius norm of G.
#[inline]
pub fn power_of(g: &CMatrix) -> f64 {
    frob_sq(g)
}

/// A * A^H.
pub fn gram(a: &CMatrix) -> CMatrix {
    a * a.adjoint()
}

/// log2 det of a Hermitian positive-definite matrix via Cholesky.
pub fn log2_det_hpd(a: &CMatrix) -> Result<f64> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("matrix is not positive definite".into()))?;
    let l = chol.l();
    Ok(2.0 * (0..a.nrows()).map(|i| l[(i, i)].re.log2()).sum::<f64>())
}

/// Solve A X = B for Hermitian positive-definite A.
pub fn solve_hpd(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("matrix is not positive definite".into()))?;
    Ok(chol.solve(b))
}

/// Hermitian inverse square root with an eigenvalue floor of
/// `1e-12 * trace(A)` guarding near-singular inputs.
pub fn inv_sqrt_hermitian(a: &CMatrix) -> CMatrix {
    let eig = a.clone().symmetric_eigen();
    let floor = 1e-12 * eig.eigenvalues.iter().sum::<f64>().abs();
    let mut scaled = eig.eigenvectors.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        let lam = eig.eigenvalues[k].max(floor);
        col *= c64(1.0 / lam.sqrt(), 0.0);
    }
    &scaled * eig.eigenvectors.adjoint()
}

/// Unit eigenvector of the largest eigenvalue of the Hermitian matrix `a`.
///
/// Degenerate maxima are resolved deterministically: among eigenvectors whose
/// eigenvalue is within `1e-9 * |lambda_max|` of the maximum, pick the one
/// whose absolute-component sequence is lexicographically largest, then
/// rotate the phase so the largest-magnitude entry is real positive.
pub fn dominant_eigenvector(a: &CMatrix) -> (f64, CVector) {
    let eig = a.clone().symmetric_eigen();
    let lam_max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-9 * lam_max.abs().max(1e-300);
    let mut best: Option<CVector> = None;
    for k in 0..eig.eigenvalues.len() {
        if eig.eigenvalues[k] >= lam_max - tol {
            let v: CVector = eig.eigenvectors.column(k).into_owned();
            let replace = match &best {
                None => true,
                Some(b) => lex_abs_greater(&v, b),
            };
            if replace {
                best = Some(v);
            }
        }
    }
    let mut v = best.expect("hermitian matrix has at least one eigenvalue");
    // Phase normalization: largest-magnitude entry becomes real positive.
    let mut arg = 0usize;
    for i in 1..v.len() {
        if v[i].norm() > v[arg].norm() {
            arg = i;
        }
    }
    let pivot = v[arg];
    if pivot.norm() > 0.0 {
        let phase = pivot / c64(pivot.norm(), 0.0);
        v /= phase;
    }
    let norm = v.norm();
    if norm > 0.0 {
        v /= c64(norm, 0.0);
    }
    (lam_max, v)
}

fn lex_abs_greater(a: &CVector, b: &CVector) -> bool {
    for i in 0..a.len() {
        let (x, y) = (a[i].norm(), b[i].norm());
        if x > y {
            return true;
        }
        if x < y {
            return false;
        }
    }
    false
}

/// Assemble sigma^2 I + sum over `terms` of H G G^H H^H.
pub fn noise_plus_gram(sigma2: f64, n: usize, terms: impl Iterator<Item = CMatrix>) -> CMatrix {
    let mut acc = CMatrix::identity(n, n) * c64(sigma2, 0.0);
    for t in terms {
        acc += t;
    }
    acc
}
