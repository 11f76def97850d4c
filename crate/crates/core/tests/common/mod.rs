//! Test-side reference implementations, independent of the library solver.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Design matrix built straight from the pattern definitions.
pub fn design(n: usize, f: usize) -> DMatrix<f64> {
    let s = n / f;
    let p = 3 * n - 1 + f;
    let mut m = DMatrix::zeros(n * n, p);
    for k in 0..2 * n - 1 {
        let delta = k as isize - (n as isize - 1);
        for i in 0..n as isize {
            let j = i + delta;
            if j >= 0 && j < n as isize {
                m[(i as usize * n + j as usize, k)] = 1.0;
            }
        }
    }
    for j in 0..n {
        for i in 0..n {
            m[(i * n + j, 2 * n - 1 + j)] = 1.0;
        }
    }
    for r in 0..f {
        for i in r * s..(r + 1) * s {
            for j in r * s..(r + 1) * s {
                m[(i * n + j, 3 * n - 1 + r)] = 1.0;
            }
        }
    }
    m
}

/// Unique minimizer of `‖s - Mx‖² + λ‖x‖²`: eigendecomposition of `MᵀM`,
/// exact zero eigenvalues dropped (their directions see no data), filter
/// `1 / (μ + λ)` on the rest.
pub fn ridge_spectral(n: usize, f: usize, s_rowmajor: &[f64], lambda: f64) -> Vec<f64> {
    let m = design(n, f);
    let g = m.transpose() * &m;
    let rhs = m.transpose() * DVector::from_column_slice(s_rowmajor);
    let eig = g.symmetric_eigen();
    let mut x = DVector::zeros(m.ncols());
    for (i, &mu) in eig.eigenvalues.iter().enumerate() {
        if mu > 1e-9 {
            let v = eig.eigenvectors.column(i);
            x += v * (v.dot(&rhs) / (mu + lambda));
        }
    }
    x.iter().copied().collect()
}

/// Same problem through a QR solve of the stacked system `[M; √λ I] x = [s; 0]`.
/// Accurate only to about `eps · κ²`, with `κ ≈ σ_max / √λ`.
pub fn ridge_qr(n: usize, f: usize, s_rowmajor: &[f64], lambda: f64) -> Vec<f64> {
    assert!(lambda > 0.0);
    let m = design(n, f);
    let (rows, p) = m.shape();
    let mut a = DMatrix::zeros(rows + p, p);
    a.view_mut((0, 0), (rows, p)).copy_from(&m);
    for i in 0..p {
        a[(rows + i, i)] = lambda.sqrt();
    }
    let mut b = DVector::zeros(rows + p);
    b.rows_mut(0, rows).copy_from_slice(s_rowmajor);
    let qr = a.qr();
    let qtb = qr.q().transpose() * b;
    let x = qr.r().solve_upper_triangular(&qtb).expect("full column rank");
    x.iter().copied().collect()
}

/// `‖s - Mx‖ / ‖s‖` with the explicit design matrix.
pub fn nae_explicit(n: usize, f: usize, s_rowmajor: &[f64], x: &[f64]) -> f64 {
    let m = design(n, f);
    let s = DVector::from_column_slice(s_rowmajor);
    let r = &s - m * DVector::from_column_slice(x);
    r.norm() / s.norm()
}

pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Deterministic, RNG-free test map with entries in `[0, 1]`.
pub fn formula_map(n: usize) -> Vec<f64> {
    (0..n * n)
        .map(|k| ((k / n * 7 + k % n * 13 + (k / n) * (k % n)) % 11) as f64 / 10.0)
        .collect()
}
