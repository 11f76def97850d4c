//! Temporal fusion of masked attention maps and the map-level error metrics.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::types::{AttentionMap, SparsityMap, TokenMask};

/// Takes `masked` where the mask passes and `previous` where it blocks.
pub fn reconstruct_attention(
    masked: &AttentionMap,
    mask: &TokenMask,
    previous: &AttentionMap,
) -> Result<AttentionMap> {
    let side = masked.side();
    if previous.side() != side {
        return Err(Error::mismatch("previous reconstruction", side, previous.side()));
    }
    if mask.side() != side {
        return Err(Error::mismatch("token mask", side, mask.side()));
    }
    let data = masked
        .values
        .as_slice()
        .iter()
        .zip(previous.values.as_slice())
        .zip(mask.as_slice())
        .map(|((&cur, &old), &pass)| if pass { cur } else { old })
        .collect();
    Ok(AttentionMap {
        values: Matrix::from_vec(side, side, data)?,
        step: masked.step,
    })
}

fn relative_distance(a: &Matrix, reference: &Matrix, what: &'static str) -> Result<f64> {
    let norm = reference.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::ZeroNorm(what));
    }
    Ok(a.frobenius_distance(reference)? / norm)
}

/// Normalized reconstruction error `‖Ŝ - S_GT‖_F / ‖S_GT‖_F`.
pub fn nre(reconstructed: &SparsityMap, ground_truth: &SparsityMap) -> Result<f64> {
    relative_distance(&reconstructed.values, &ground_truth.values, "ground-truth sparsity map")
}

/// Difference error ratio `‖S(t) - S_ref‖_F / ‖S_ref‖_F`.
pub fn der(current: &SparsityMap, reference: &SparsityMap) -> Result<f64> {
    relative_distance(&current.values, &reference.values, "reference sparsity map")
}

/// Linearity residual over one segment: RMS of `truth - predicted` divided
/// by the range of `truth`.
pub fn linearity_nre(truth: &[f64], predicted: &[f64]) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(Error::mismatch("linearity segment", truth.len(), predicted.len()));
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("empty segment".into()));
    }
    let (lo, hi) = truth
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if range == 0.0 {
        return Err(Error::ZeroNorm("segment range"));
    }
    let mse = truth
        .iter()
        .zip(predicted)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / truth.len() as f64;
    Ok(mse.sqrt() / range)
}
