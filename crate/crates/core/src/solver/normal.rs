//! Closed-form assembly of `MᵀM + λI` and `Mᵀ vec(S)` from support counts.

use crate::error::Result;
use crate::layout::GridLayout;
use crate::matrix::{dot, Matrix};
use crate::types::SparsityMap;

/// Regularized normal equations for one sparsity map.
#[derive(Debug, Clone)]
pub struct NormalSystem {
    pub gram: Matrix,
    pub rhs: Vec<f64>,
}

/// `MᵀM + λI` built block by block; the design matrix is never formed.
///
/// Blocks, for diagonal offset `δ`, frame side `s`:
/// - `CᵀC = diag(n - |δ|)`, `DᵀD = nI`, `EᵀE = s²I`
/// - `[CᵀD]_{k,j} = 1` iff column `j` meets diagonal `k`, i.e. `0 <= j - δ < n`
/// - `[CᵀE]_{k,r} = max(0, s - |δ|)`, the same for every frame on the main diagonal
/// - `[DᵀE]_{j,r} = s` iff column `j` lies in frame `r`
pub fn assemble_normal_matrix(layout: &GridLayout, lambda: f64) -> Matrix {
    let n = layout.grid();
    let f = layout.frames();
    let s = layout.blocks_per_frame();
    let nd = layout.n_diagonals();
    let p = layout.pattern_count();
    let (d0, e0) = (nd, nd + n);
    let mut g = Matrix::zeros(p, p);

    for k in 0..nd {
        let delta = k as isize - (n as isize - 1);
        let abs = delta.unsigned_abs();
        g[(k, k)] = (n - abs) as f64;

        // Columns j with row i = j - δ inside the grid.
        let lo = delta.max(0) as usize;
        let hi = (n as isize + delta).min(n as isize) as usize;
        for j in lo..hi {
            g[(k, d0 + j)] = 1.0;
            g[(d0 + j, k)] = 1.0;
        }

        let ce = s.saturating_sub(abs) as f64;
        if ce > 0.0 {
            for r in 0..f {
                g[(k, e0 + r)] = ce;
                g[(e0 + r, k)] = ce;
            }
        }
    }
    for j in 0..n {
        g[(d0 + j, d0 + j)] = n as f64;
        let r = layout.frame_of(j);
        g[(d0 + j, e0 + r)] = s as f64;
        g[(e0 + r, d0 + j)] = s as f64;
    }
    for r in 0..f {
        g[(e0 + r, e0 + r)] = (s * s) as f64;
    }
    if lambda != 0.0 {
        for i in 0..p {
            g[(i, i)] += lambda;
        }
    }
    g
}

/// `Mᵀ vec(S)`: diagonal sums, column sums, then frame-square sums.
pub fn assemble_rhs(map: &SparsityMap, layout: &GridLayout) -> Result<Vec<f64>> {
    map.check_layout(layout)?;
    let n = layout.grid();
    let nd = layout.n_diagonals();
    let s = layout.blocks_per_frame();
    let mut rhs = vec![0.0; layout.pattern_count()];
    let (diag, rest) = rhs.split_at_mut(nd);
    let (cols, frames) = rest.split_at_mut(n);
    for i in 0..n {
        let row = map.values.row(i);
        let fi = layout.frame_of(i);
        for (j, &v) in row.iter().enumerate() {
            diag[j + n - 1 - i] += v;
            cols[j] += v;
        }
        frames[fi] += row[fi * s..(fi + 1) * s].iter().sum::<f64>();
    }
    Ok(rhs)
}

pub fn assemble(map: &SparsityMap, layout: &GridLayout, lambda: f64) -> Result<NormalSystem> {
    Ok(NormalSystem {
        gram: assemble_normal_matrix(layout, lambda),
        rhs: assemble_rhs(map, layout)?,
    })
}

/// Orthonormal basis of the null space of the design matrix.
///
/// Every diagonal covers the grid once and so does every column, so
/// `Σ C_k = Σ D_k` always. With one frame `E_1` is the whole grid; with
/// single-block frames `Σ E_r` is the main diagonal. On the 2×2 grid split
/// into two frames `D_1 = C_{-1} + E_1` adds one more relation. These are all
/// the relations; the exhaustive rank check in the tests covers n <= 32.
pub fn null_space_basis(layout: &GridLayout) -> Vec<Vec<f64>> {
    let n = layout.grid();
    let nd = layout.n_diagonals();
    let p = layout.pattern_count();
    let (d0, e0) = (nd, nd + n);
    let mut raw = Vec::new();

    let mut v = vec![0.0; p];
    v[..nd].iter_mut().for_each(|x| *x = 1.0);
    v[d0..e0].iter_mut().for_each(|x| *x = -1.0);
    raw.push(v);

    if layout.frames() == 1 {
        let mut v = vec![0.0; p];
        v[d0..e0].iter_mut().for_each(|x| *x = 1.0);
        v[e0] = -1.0;
        raw.push(v);
    }
    if layout.blocks_per_frame() == 1 {
        let mut v = vec![0.0; p];
        v[n - 1] = 1.0;
        v[e0..].iter_mut().for_each(|x| *x = -1.0);
        raw.push(v);
    }
    if n == 2 && layout.frames() == 2 {
        let mut v = vec![0.0; p];
        v[0] = 1.0;
        v[e0] = 1.0;
        v[d0] = -1.0;
        raw.push(v);
    }

    // Modified Gram-Schmidt; dependent generators (n = 1) drop out.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for mut v in raw {
        for q in &basis {
            let c = dot(&v, q);
            v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-9 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    basis
}

/// Removes the null-space component of `x` in place.
pub fn project_out_null_space(x: &mut [f64], basis: &[Vec<f64>]) {
    for q in basis {
        let c = dot(x, q);
        x.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{materialize_design_matrix, DEFAULT_DESIGN_CAP_BYTES};

    fn lay(n: usize, f: usize) -> GridLayout {
        GridLayout::from_grid(n, f).unwrap()
    }

    #[test]
    fn closed_form_blocks_n4() {
        let l = lay(4, 2);
        let g = assemble_normal_matrix(&l, 0.0);
        let diag_c: Vec<f64> = (0..7).map(|k| g[(k, k)]).collect();
        assert_eq!(diag_c, vec![1., 2., 3., 4., 3., 2., 1.]);
        for j in 0..4 {
            for i in 0..4 {
                assert_eq!(g[(7 + i, 7 + j)], if i == j { 4.0 } else { 0.0 });
            }
        }
        assert_eq!((g[(11, 11)], g[(12, 12)], g[(11, 12)]), (4.0, 4.0, 0.0));
    }

    #[test]
    fn lambda_lands_on_the_diagonal() {
        let l = lay(4, 2);
        let g0 = assemble_normal_matrix(&l, 0.0);
        let g1 = assemble_normal_matrix(&l, 0.25);
        for i in 0..13 {
            for j in 0..13 {
                let want = g0[(i, j)] + if i == j { 0.25 } else { 0.0 };
                assert_eq!(g1[(i, j)], want);
                assert_eq!(g1[(i, j)], g1[(j, i)]);
            }
        }
    }

    #[test]
    fn matches_explicit_gram_for_all_small_layouts() {
        for n in 1..=12 {
            for f in (1..=n).filter(|f| n % f == 0) {
                let l = lay(n, f);
                let m = materialize_design_matrix(&l, DEFAULT_DESIGN_CAP_BYTES).unwrap();
                let want = m.transpose().matmul(&m).unwrap();
                assert_eq!(assemble_normal_matrix(&l, 0.0), want, "n={n} f={f}");
            }
        }
    }

    #[test]
    fn rhs_of_all_ones() {
        let l = lay(4, 2);
        let s = SparsityMap::new(Matrix::filled(4, 4, 1.0), 0).unwrap();
        let r = assemble_rhs(&s, &l).unwrap();
        assert_eq!(r, vec![1., 2., 3., 4., 3., 2., 1., 4., 4., 4., 4., 4., 4.]);
        let z = SparsityMap::new(Matrix::zeros(4, 4), 0).unwrap();
        assert!(assemble_rhs(&z, &l).unwrap().iter().all(|v| *v == 0.0));
        assert!(assemble_rhs(&z, &lay(8, 2)).is_err());
    }

    #[test]
    fn null_space_is_exact_and_complete() {
        for n in 1..=32 {
            for f in (1..=n).filter(|f| n % f == 0) {
                let l = lay(n, f);
                let m = materialize_design_matrix(&l, DEFAULT_DESIGN_CAP_BYTES).unwrap();
                let basis = null_space_basis(&l);
                for q in &basis {
                    let mq = m.matvec(q).unwrap();
                    assert!(mq.iter().all(|v| v.abs() < 1e-12), "n={n} f={f}");
                }
                let svd = m.to_nalgebra().svd(false, false);
                let smax = svd.singular_values.max();
                let rank = svd
                    .singular_values
                    .iter()
                    .filter(|s| **s > 1e-9 * smax)
                    .count();
                assert_eq!(l.pattern_count() - rank, basis.len(), "n={n} f={f}");
            }
        }
    }
}
