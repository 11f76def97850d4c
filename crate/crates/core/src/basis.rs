//! The three pattern families and their binary supports on the block grid.
//!
//! Indices are 0-based. Parallel diagonal `k` has offset `k - (n - 1)`, so
//! `k = n - 1` is the main diagonal. Vertical `k` is block column `k`. Block
//! diagonal `r` is the square `[r*s, (r+1)*s)²` with `s = n / f`.

use std::fmt;

use crate::error::{Error, Result};
use crate::layout::GridLayout;
use crate::matrix::Matrix;
use crate::types::IntensityVector;

/// Default ceiling for materializing the explicit design matrix.
pub const DEFAULT_DESIGN_CAP_BYTES: usize = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    ParallelDiagonal,
    Vertical,
    BlockDiagonal,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::ParallelDiagonal => "parallel",
            Family::Vertical => "vertical",
            Family::BlockDiagonal => "block",
        }
    }

    pub fn from_name(s: &str) -> Option<Family> {
        match s {
            "parallel" | "C" => Some(Family::ParallelDiagonal),
            "vertical" | "D" => Some(Family::Vertical),
            "block" | "E" => Some(Family::BlockDiagonal),
            _ => None,
        }
    }
}

/// One basis pattern. Ordering is family first, then index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatternId {
    pub family: Family,
    pub index: usize,
}

impl PatternId {
    pub fn parallel(index: usize) -> Self {
        Self {
            family: Family::ParallelDiagonal,
            index,
        }
    }

    /// Parallel diagonal with the given offset `j - i`.
    pub fn diagonal_offset(offset: isize, layout: &GridLayout) -> Result<Self> {
        let k = offset + layout.grid() as isize - 1;
        let id = Self::parallel(usize::try_from(k).map_err(|_| {
            Error::InvalidArgument(format!("diagonal offset {offset} out of range"))
        })?);
        id.validate(layout)?;
        Ok(id)
    }

    pub fn vertical(index: usize) -> Self {
        Self {
            family: Family::Vertical,
            index,
        }
    }

    pub fn block(index: usize) -> Self {
        Self {
            family: Family::BlockDiagonal,
            index,
        }
    }

    pub fn family_size(family: Family, layout: &GridLayout) -> usize {
        match family {
            Family::ParallelDiagonal => layout.n_diagonals(),
            Family::Vertical => layout.grid(),
            Family::BlockDiagonal => layout.frames(),
        }
    }

    pub fn validate(&self, layout: &GridLayout) -> Result<()> {
        let size = Self::family_size(self.family, layout);
        if self.index >= size {
            return Err(Error::InvalidArgument(format!(
                "{} index {} out of range (family has {size} patterns)",
                self.family.name(),
                self.index
            )));
        }
        Ok(())
    }

    /// Diagonal offset `j - i` for parallel patterns.
    pub fn offset(&self, layout: &GridLayout) -> Option<isize> {
        (self.family == Family::ParallelDiagonal)
            .then(|| self.index as isize - (layout.grid() as isize - 1))
    }

    /// Position of this pattern's column in the design matrix.
    pub fn column(&self, layout: &GridLayout) -> usize {
        match self.family {
            Family::ParallelDiagonal => self.index,
            Family::Vertical => layout.n_diagonals() + self.index,
            Family::BlockDiagonal => layout.n_diagonals() + layout.grid() + self.index,
        }
    }

    /// Number of cells in the support.
    pub fn support_size(&self, layout: &GridLayout) -> usize {
        match self.family {
            Family::ParallelDiagonal => layout.grid() - self.offset(layout).unwrap().unsigned_abs(),
            Family::Vertical => layout.grid(),
            Family::BlockDiagonal => layout.blocks_per_frame().pow(2),
        }
    }

    /// Whether block `(i, j)` belongs to the support.
    pub fn contains(&self, i: usize, j: usize, layout: &GridLayout) -> bool {
        match self.family {
            Family::ParallelDiagonal => {
                j as isize - i as isize == self.offset(layout).unwrap()
            }
            Family::Vertical => j == self.index,
            Family::BlockDiagonal => {
                layout.frame_of(i) == self.index && layout.frame_of(j) == self.index
            }
        }
    }

    /// Calls `f(i, j)` for every support cell in row-major order.
    pub fn for_each_cell(&self, layout: &GridLayout, mut f: impl FnMut(usize, usize)) {
        let n = layout.grid();
        match self.family {
            Family::ParallelDiagonal => {
                let delta = self.offset(layout).unwrap();
                for i in 0..n {
                    let j = i as isize + delta;
                    if (0..n as isize).contains(&j) {
                        f(i, j as usize);
                    }
                }
            }
            Family::Vertical => (0..n).for_each(|i| f(i, self.index)),
            Family::BlockDiagonal => {
                let s = layout.blocks_per_frame();
                let lo = self.index * s;
                for i in lo..lo + s {
                    for j in lo..lo + s {
                        f(i, j);
                    }
                }
            }
        }
    }
}

impl fmt::Display for PatternId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.family.name(), self.index)
    }
}

/// Every pattern in design-matrix column order.
pub fn all_patterns(layout: &GridLayout) -> Vec<PatternId> {
    (0..layout.n_diagonals())
        .map(PatternId::parallel)
        .chain((0..layout.grid()).map(PatternId::vertical))
        .chain((0..layout.frames()).map(PatternId::block))
        .collect()
}

/// Exact support of a basis matrix as row-major `(row, col)` pairs.
pub fn support(id: PatternId, layout: &GridLayout) -> Result<Vec<(usize, usize)>> {
    id.validate(layout)?;
    let mut cells = Vec::with_capacity(id.support_size(layout));
    id.for_each_cell(layout, |i, j| cells.push((i, j)));
    Ok(cells)
}

/// Explicit `n² × (3n - 1 + f)` design matrix, rows in row-major `vec` order.
pub fn materialize_design_matrix(layout: &GridLayout, cap_bytes: usize) -> Result<Matrix> {
    let n = layout.grid();
    let rows = n * n;
    let cols = layout.pattern_count();
    let required = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(std::mem::size_of::<f64>()))
        .unwrap_or(usize::MAX);
    if required > cap_bytes {
        return Err(Error::MemoryCap {
            required,
            cap: cap_bytes,
        });
    }
    let mut m = Matrix::zeros(rows, cols);
    for id in all_patterns(layout) {
        let col = id.column(layout);
        id.for_each_cell(layout, |i, j| m[(i * n + j, col)] = 1.0);
    }
    Ok(m)
}

/// `Σ c_k C_k + Σ d_k D_k + Σ e_k E_k`, evaluated without the design matrix.
pub fn synthesize(x: &IntensityVector, layout: &GridLayout) -> Result<Matrix> {
    x.check_layout(layout)?;
    let n = layout.grid();
    let offset = n - 1;
    Ok(Matrix::from_fn(n, n, |i, j| {
        let diag = x.c[j + offset - i];
        let fi = layout.frame_of(i);
        let block = if fi == layout.frame_of(j) { x.e[fi] } else { 0.0 };
        diag + x.d[j] + block
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn lay(n: usize, f: usize) -> GridLayout {
        GridLayout::from_grid(n, f).unwrap()
    }

    #[test]
    fn support_examples() {
        let l = lay(4, 2);
        // 1-based k = 4 is the main diagonal.
        assert_eq!(
            support(PatternId::parallel(3), &l).unwrap(),
            vec![(0, 0), (1, 1), (2, 2), (3, 3)]
        );
        assert_eq!(
            support(PatternId::vertical(1), &l).unwrap(),
            vec![(0, 1), (1, 1), (2, 1), (3, 1)]
        );
        assert_eq!(
            support(PatternId::block(1), &l).unwrap(),
            vec![(2, 2), (2, 3), (3, 2), (3, 3)]
        );
        assert!(support(PatternId::block(2), &l).is_err());
        assert!(support(PatternId::parallel(7), &l).is_err());
        assert_eq!(PatternId::diagonal_offset(-3, &l).unwrap(), PatternId::parallel(0));
        assert!(PatternId::diagonal_offset(4, &l).is_err());
    }

    #[test]
    fn design_matrix_small_cases() {
        let m = materialize_design_matrix(&lay(2, 1), DEFAULT_DESIGN_CAP_BYTES).unwrap();
        assert_eq!(m.shape(), (4, 6));
        let sums: Vec<f64> = (0..6).map(|c| (0..4).map(|r| m[(r, c)]).sum()).collect();
        assert_eq!(sums, vec![1., 2., 1., 2., 2., 4.]);

        let m = materialize_design_matrix(&lay(1, 1), DEFAULT_DESIGN_CAP_BYTES).unwrap();
        assert_eq!(m, Matrix::filled(1, 3, 1.0));

        let err = materialize_design_matrix(&lay(8, 2), 100).unwrap_err();
        assert!(matches!(err, Error::MemoryCap { required, .. } if required == 64 * 25 * 8));
    }

    #[test]
    fn design_matrix_is_rank_deficient() {
        let m = materialize_design_matrix(&lay(4, 2), DEFAULT_DESIGN_CAP_BYTES).unwrap();
        let svd = m.to_nalgebra().svd(false, false);
        let smax = svd.singular_values.max();
        let rank = svd
            .singular_values
            .iter()
            .filter(|s| **s > 1e-10 * smax)
            .count();
        assert!(rank < 13, "rank {rank}");
    }

    #[test]
    fn supports_match_sizes_and_families_are_disjoint() {
        for (n, f) in [(1, 1), (3, 1), (4, 2), (6, 3), (8, 8), (9, 3)] {
            let l = lay(n, f);
            let m = materialize_design_matrix(&l, DEFAULT_DESIGN_CAP_BYTES).unwrap();
            for family in [Family::ParallelDiagonal, Family::Vertical, Family::BlockDiagonal] {
                let mut seen = HashSet::new();
                for id in all_patterns(&l).into_iter().filter(|p| p.family == family) {
                    let cells = support(id, &l).unwrap();
                    assert_eq!(cells.len(), id.support_size(&l));
                    let col_sum: f64 = (0..n * n).map(|r| m[(r, id.column(&l))]).sum();
                    assert_eq!(col_sum as usize, cells.len());
                    for c in cells {
                        assert!(id.contains(c.0, c.1, &l));
                        assert!(seen.insert(c), "{id} overlaps at {c:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn synthesize_matches_design_matrix_product() {
        let l = lay(6, 3);
        let flat: Vec<f64> = (0..l.pattern_count()).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = IntensityVector::unflatten(&flat, &l, 0).unwrap();
        let m = materialize_design_matrix(&l, DEFAULT_DESIGN_CAP_BYTES).unwrap();
        let dense = m.matvec(&flat).unwrap();
        let fast = synthesize(&x, &l).unwrap();
        for (a, b) in dense.iter().zip(fast.as_slice()) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
