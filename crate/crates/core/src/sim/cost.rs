//! Analytic floating-point operation counts for one attention layer.

use crate::layout::GridLayout;
use crate::types::DenoisingSchedule;

/// Per-head softmax cost per score entry (max, subtract, exp, sum, divide).
const SOFTMAX_OPS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostDims {
    pub head_dim: usize,
    pub heads: usize,
}

impl Default for CostDims {
    fn default() -> Self {
        Self {
            head_dim: 128,
            heads: 24,
        }
    }
}

/// Token count, block size and frame count of the 21-frame, 1664-tokens-per-frame
/// setting used for the reference cost comparison.
pub fn reference_layout() -> GridLayout {
    GridLayout::new(21 * 1664, 128, 21).expect("valid reference layout")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostSummary {
    /// Flops per step, summed over heads.
    pub full: f64,
    pub sparsify: f64,
    pub solve: f64,
    pub masked: f64,
    /// `(sparsify + solve) / full`.
    pub overhead_fraction: f64,
    /// `masked / full`.
    pub masked_ratio: f64,
    /// Whole-schedule totals: all steps dense versus warm-up dense plus sparse steps.
    pub schedule_full: f64,
    pub schedule_sparse: f64,
}

/// Scores and the value product are `2N²d` each.  The masked path still
/// forms the dense score matrix (the mask is additive) but runs softmax and
/// the value product only on passing blocks.
pub fn cost_model(
    layout: &GridLayout,
    schedule: &DenoisingSchedule,
    dims: CostDims,
    pass_fraction: f64,
) -> CostSummary {
    let n_tok = layout.n_tokens() as f64;
    let d = dims.head_dim as f64;
    let heads = dims.heads as f64;
    let nn = n_tok * n_tok;
    let pf = pass_fraction.clamp(0.0, 1.0);

    let full = heads * (4.0 * nn * d + SOFTMAX_OPS * nn);
    let masked = heads * (2.0 * nn * d + pf * (SOFTMAX_OPS * nn + 2.0 * nn * d));
    // Threshold compare plus block accumulation on every entry.
    let sparsify = heads * 2.0 * nn;
    let n = layout.grid() as f64;
    let p = layout.pattern_count() as f64;
    let solve = heads * (p * p * p / 3.0 + 2.0 * p * p + 6.0 * n * n);

    let steps = f64::from(schedule.total_steps());
    let warm = f64::from(schedule.warmup());
    let solves = 2.0 + schedule.prediction_steps().len().saturating_sub(1) as f64;
    CostSummary {
        full,
        sparsify,
        solve,
        masked,
        overhead_fraction: (sparsify + solve) / full,
        masked_ratio: masked / full,
        schedule_full: steps * full,
        schedule_sparse: warm * full + (steps - warm) * masked + solves * (sparsify + solve),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_dims() {
        let l = reference_layout();
        assert_eq!(l.n_tokens(), 34944);
        assert_eq!(l.grid(), 273);
        assert_eq!(l.blocks_per_frame(), 13);
    }

    #[test]
    fn full_pass_costs_full() {
        let l = GridLayout::new(4096, 64, 4).unwrap();
        let c = cost_model(&l, &DenoisingSchedule::default(), CostDims::default(), 1.0);
        assert!((c.masked - c.full).abs() <= 1e-12 * c.full);
        assert!((c.masked_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn half_pass_at_reference_dims() {
        let c = cost_model(&reference_layout(), &DenoisingSchedule::default(), CostDims::default(), 0.5);
        // Reference table: 5.7096 / 7.6127.
        assert!((c.masked_ratio - 5.7096 / 7.6127).abs() < 0.01);
        assert!((0.001..=0.02).contains(&c.overhead_fraction));
        assert!(c.schedule_sparse < c.schedule_full);
    }

    #[test]
    fn large_grid_overhead() {
        let l = GridLayout::new(81 * 4096, 128, 81).unwrap();
        let c = cost_model(&l, &DenoisingSchedule::default(), CostDims::default(), 0.2);
        assert!((0.001..=0.02).contains(&c.overhead_fraction));
    }
}
