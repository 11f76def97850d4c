//! Reference solve through the explicit design matrix.

use nalgebra::linalg::SymmetricEigen;
use nalgebra::DVector;

use super::factor::spectral_filter;
use crate::basis::{materialize_design_matrix, DEFAULT_DESIGN_CAP_BYTES};
use crate::error::{Error, Result};
use crate::layout::GridLayout;
use crate::matrix::Matrix;
use crate::types::{IntensityVector, SparsityMap};

/// Minimum-norm minimizer of `‖vec(S) - MX‖² + λ‖X‖²` from the spectral
/// decomposition of the explicit `MᵀM`, with filter factors `1 / (μ + λ)`
/// on the range of `M`.
pub fn dense_oracle_solve(
    map: &SparsityMap,
    layout: &GridLayout,
    lambda: f64,
) -> Result<IntensityVector> {
    dense_oracle_solve_capped(map, layout, lambda, DEFAULT_DESIGN_CAP_BYTES)
}

pub fn dense_oracle_solve_capped(
    map: &SparsityMap,
    layout: &GridLayout,
    lambda: f64,
    cap_bytes: usize,
) -> Result<IntensityVector> {
    map.check_layout(layout)?;
    let m = materialize_design_matrix(layout, cap_bytes)?.to_nalgebra();
    let eig = SymmetricEigen::try_new(m.tr_mul(&m), f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("oracle eigendecomposition did not converge".into()))?;
    let rhs = m.tr_mul(&DVector::from_column_slice(map.values.as_slice()));
    let rhs: Vec<f64> = rhs.iter().copied().collect();
    let flat = spectral_filter(&eig, &rhs, |mu| 1.0 / (mu + lambda));
    IntensityVector::unflatten(&flat, layout, map.step)
}

/// `MᵀM` and `Mᵀ vec(S)` by explicit dense products over the materialized `M`.
pub fn materialized_normal_system(
    map: &SparsityMap,
    layout: &GridLayout,
    lambda: f64,
    cap_bytes: usize,
) -> Result<(Matrix, Vec<f64>)> {
    map.check_layout(layout)?;
    let m = materialize_design_matrix(layout, cap_bytes)?.to_nalgebra();
    let mut gram = m.tr_mul(&m);
    for i in 0..gram.nrows() {
        gram[(i, i)] += lambda;
    }
    let s = DVector::from_column_slice(map.values.as_slice());
    let rhs = m.tr_mul(&s);
    let p = gram.nrows();
    let gram = Matrix::from_fn(p, p, |r, c| gram[(r, c)]);
    Ok((gram, rhs.iter().copied().collect()))
}
