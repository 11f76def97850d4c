//! Least-squares decomposition of a sparsity map into pattern intensities.

mod factor;
mod normal;
mod oracle;

pub use factor::{
    cholesky, cholesky_solve, lu, lu_solve, pinv_solve, solve_symmetric, LinearSolve, LuFactors,
    SolverPath,
};
pub use normal::{
    assemble, assemble_normal_matrix, assemble_rhs, null_space_basis, project_out_null_space,
    NormalSystem,
};
pub use oracle::{dense_oracle_solve, dense_oracle_solve_capped, materialized_normal_system};

use crate::basis::synthesize;
use crate::error::{Error, Result};
use crate::layout::GridLayout;
use crate::types::{IntensityVector, SolverConfig, SparsityMap};

/// Fitted intensities plus how they were obtained.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub intensities: IntensityVector,
    pub path: SolverPath,
    /// Multiply-add count for assembly, factorization and solve.
    pub ops: u64,
}

/// Regularized least-squares fit through the closed-form normal equations.
///
/// The result has no component in the null space of the design matrix, so
/// it is the unique minimizer of `‖vec(S) - MX‖² + λ‖X‖²` (the minimum-norm
/// least-squares fit when `λ = 0`).
pub fn solve_intensities(
    map: &SparsityMap,
    layout: &GridLayout,
    cfg: &SolverConfig,
) -> Result<Decomposition> {
    if !(cfg.lambda >= 0.0) || !cfg.lambda.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "lambda must be finite and >= 0, got {}",
            cfg.lambda
        )));
    }
    let sys = assemble(map, layout, cfg.lambda)?;
    let n = layout.grid() as u64;
    let assembly_ops = 2 * n * n + layout.pattern_count() as u64 * 4;
    finish(sys.gram, sys.rhs, map, layout, assembly_ops)
}

/// Same fit, but with `MᵀM` formed by dense products over the explicit design
/// matrix. Used as the naive baseline in benchmarks.
pub fn solve_materialized(
    map: &SparsityMap,
    layout: &GridLayout,
    lambda: f64,
    cap_bytes: usize,
) -> Result<Decomposition> {
    let (gram, rhs) = materialized_normal_system(map, layout, lambda, cap_bytes)?;
    let rows = (layout.grid() * layout.grid()) as u64;
    let p = layout.pattern_count() as u64;
    finish(gram, rhs, map, layout, rows * p * p + rows * p)
}

fn finish(
    gram: crate::matrix::Matrix,
    rhs: Vec<f64>,
    map: &SparsityMap,
    layout: &GridLayout,
    assembly_ops: u64,
) -> Result<Decomposition> {
    let mut solved = solve_symmetric(&gram, &rhs)?;
    let basis = null_space_basis(layout);
    project_out_null_space(&mut solved.x, &basis);
    let p = layout.pattern_count() as u64;
    let ops = assembly_ops + solved.ops + 2 * p * basis.len() as u64;
    Ok(Decomposition {
        intensities: IntensityVector::unflatten(&solved.x, layout, map.step)?,
        path: solved.path,
        ops,
    })
}

/// Normalized approximation error `‖S - Σ x_k P_k‖_F / ‖S‖_F`.
pub fn nae(map: &SparsityMap, x: &IntensityVector, layout: &GridLayout) -> Result<f64> {
    map.check_layout(layout)?;
    let norm = map.values.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::ZeroNorm("sparsity map"));
    }
    let recon = synthesize(x, layout)?;
    Ok(map.values.frobenius_distance(&recon)? / norm)
}

/// Regularized objective `‖vec(S) - MX‖² + λ‖X‖²`.
pub fn objective(map: &SparsityMap, x: &IntensityVector, layout: &GridLayout, lambda: f64) -> Result<f64> {
    let recon = synthesize(x, layout)?;
    let r = map.values.frobenius_distance(&recon)?;
    let reg: f64 = x.flatten().iter().map(|v| v * v).sum();
    Ok(r * r + lambda * reg)
}
