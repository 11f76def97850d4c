//! Dense factorizations behind the normal-equation solve.
//!
//! The chain is tried in order: Cholesky, LU with partial pivoting, then an
//! SVD pseudoinverse. Each stage rejects pivots at or below
//! `dim * eps * scale` so rank-deficient systems reach the pseudoinverse.

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverPath {
    Cholesky,
    Lu,
    PseudoInverse,
}

impl SolverPath {
    pub fn name(&self) -> &'static str {
        match self {
            SolverPath::Cholesky => "cholesky",
            SolverPath::Lu => "lu",
            SolverPath::PseudoInverse => "pinv",
        }
    }
}

impl std::fmt::Display for SolverPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Solution of a square system plus the path and a multiply-add count.
#[derive(Debug, Clone)]
pub struct LinearSolve {
    pub x: Vec<f64>,
    pub path: SolverPath,
    pub ops: u64,
}

fn check_square(a: &Matrix, b: &[f64]) -> Result<()> {
    if !a.is_square() {
        return Err(Error::mismatch(
            "system matrix",
            "square",
            format!("{}x{}", a.rows(), a.cols()),
        ));
    }
    if b.len() != a.rows() {
        return Err(Error::mismatch("right-hand side", a.rows(), b.len()));
    }
    Ok(())
}

/// Lower-triangular Cholesky factor, or `None` when a pivot is not safely positive.
pub fn cholesky(a: &Matrix) -> Option<(Matrix, u64)> {
    let p = a.rows();
    let scale = (0..p).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    let tol = p as f64 * f64::EPSILON * scale;
    let mut l = Matrix::zeros(p, p);
    let mut ops = 0u64;
    for i in 0..p {
        for j in 0..=i {
            let s = {
                let (li, lj) = (l.row(i), l.row(j));
                a[(i, j)] - dot(&li[..j], &lj[..j])
            };
            ops += j as u64;
            if i == j {
                if !(s > tol) || !s.is_finite() {
                    return None;
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Some((l, ops))
}

pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let p = l.rows();
    let mut y = vec![0.0; p];
    for i in 0..p {
        y[i] = (b[i] - dot(&l.row(i)[..i], &y[..i])) / l[(i, i)];
    }
    let mut x = y;
    for i in (0..p).rev() {
        let mut s = x[i];
        for k in i + 1..p {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// LU with partial pivoting: packed factors and the row permutation.
pub struct LuFactors {
    lu: Matrix,
    perm: Vec<usize>,
}

pub fn lu(a: &Matrix) -> Option<(LuFactors, u64)> {
    let p = a.rows();
    let scale = a.as_slice().iter().map(|v| v.abs()).fold(0.0, f64::max);
    let tol = p as f64 * f64::EPSILON * scale;
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..p).collect();
    let mut ops = 0u64;
    for k in 0..p {
        let (piv, pval) = (k..p)
            .map(|r| (r, lu[(r, k)].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(pval > tol) || !pval.is_finite() {
            return None;
        }
        if piv != k {
            perm.swap(piv, k);
            for c in 0..p {
                let t = lu[(k, c)];
                lu[(k, c)] = lu[(piv, c)];
                lu[(piv, c)] = t;
            }
        }
        let pivot = lu[(k, k)];
        let (top, bottom) = lu.as_mut_slice().split_at_mut((k + 1) * p);
        let krow = &top[k * p..];
        for r in 0..p - k - 1 {
            let row = &mut bottom[r * p..(r + 1) * p];
            let f = row[k] / pivot;
            row[k] = f;
            if f != 0.0 {
                for (x, &y) in row[k + 1..].iter_mut().zip(&krow[k + 1..]) {
                    *x -= f * y;
                }
            }
            ops += (p - k) as u64;
        }
    }
    Some((LuFactors { lu, perm }, ops))
}

pub fn lu_solve(f: &LuFactors, b: &[f64]) -> Vec<f64> {
    let p = f.lu.rows();
    let mut y: Vec<f64> = f.perm.iter().map(|&i| b[i]).collect();
    for i in 0..p {
        let s = dot(&f.lu.row(i)[..i], &y[..i]);
        y[i] -= s;
    }
    for i in (0..p).rev() {
        let s = dot(&f.lu.row(i)[i + 1..], &y[i + 1..]);
        y[i] = (y[i] - s) / f.lu[(i, i)];
    }
    y
}

/// Minimum-norm solution of a symmetric system through its eigendecomposition,
/// dropping eigenvalues at or below `n * eps * |μ|_max` in magnitude.
///
/// Only the lower triangle of `a` is read.
pub fn pinv_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if !a.is_finite() || b.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite entries in linear system".into()));
    }
    if !a.is_square() || a.rows() != b.len() {
        return Err(Error::mismatch("pseudoinverse system", a.rows(), b.len()));
    }
    let eig = nalgebra::linalg::SymmetricEigen::try_new(a.to_nalgebra(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("eigendecomposition did not converge".into()))?;
    Ok(spectral_filter(&eig, b, |mu| 1.0 / mu))
}

/// `Σ v_i (v_iᵀ b) g(μ_i)` over eigenpairs above the rank cutoff.
pub(crate) fn spectral_filter(
    eig: &nalgebra::linalg::SymmetricEigen<f64, nalgebra::Dyn>,
    b: &[f64],
    g: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let n = b.len();
    let mu_max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cutoff = n as f64 * f64::EPSILON * mu_max;
    let bvec = nalgebra::DVector::from_column_slice(b);
    let mut x = nalgebra::DVector::zeros(n);
    for (i, &mu) in eig.eigenvalues.iter().enumerate() {
        if mu.abs() > cutoff {
            let v = eig.eigenvectors.column(i);
            x += v * (v.dot(&bvec) * g(mu));
        }
    }
    x.iter().copied().collect()
}

/// Runs the factorization chain on a symmetric system.
pub fn solve_symmetric(a: &Matrix, b: &[f64]) -> Result<LinearSolve> {
    check_square(a, b)?;
    if !a.is_finite() || b.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "non-finite entries in normal system; cholesky, lu and pinv all rejected it".into(),
        ));
    }
    if let Some((l, ops)) = cholesky(a) {
        let x = cholesky_solve(&l, b);
        if x.iter().all(|v| v.is_finite()) {
            let p = a.rows() as u64;
            return Ok(LinearSolve {
                x,
                path: SolverPath::Cholesky,
                ops: ops + p * p,
            });
        }
    }
    if let Some((f, ops)) = lu(a) {
        let x = lu_solve(&f, b);
        if x.iter().all(|v| v.is_finite()) {
            let p = a.rows() as u64;
            return Ok(LinearSolve {
                x,
                path: SolverPath::Lu,
                ops: ops + p * p,
            });
        }
    }
    let x = pinv_solve(a, b)?;
    let p = a.rows() as u64;
    Ok(LinearSolve {
        x,
        path: SolverPath::PseudoInverse,
        ops: 12 * p * p * p,
    })
}
