//! Block-sparse attention masks from a structured decomposition of attention
//! sparsity maps into diagonal, vertical and block-diagonal patterns.
//!
//! The pipeline: [`sparsify::attention_to_sparsity`] turns an attention map
//! into a block sparsity map, [`solver::solve_intensities`] fits pattern
//! intensities through closed-form normal equations,
//! [`predictor`] extrapolates them across denoising steps, and [`mask`]
//! turns predicted intensities into block masks. [`sim`] runs the whole loop
//! on synthetic maps with known ground truth.

// `!(x >= 0.0)` is used on purpose so NaN fails validation too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod bench;
pub mod error;
pub mod io;
pub mod layout;
pub mod mask;
pub mod matrix;
pub mod predictor;
pub mod reconstruct;
pub mod sim;
pub mod solver;
pub mod sparsify;
pub mod types;

pub use basis::{all_patterns, materialize_design_matrix, support, synthesize, Family, PatternId};
pub use error::{Error, Result};
pub use layout::{make_layout, GridLayout};
pub use mask::{build_block_mask, concat_heads, ensure_row_coverage, sparsity_ratio, topk_patterns, upsample_mask, LayerMask};
pub use matrix::Matrix;
pub use predictor::{block_diag_decision, extrapolate, predict_window, PredictedStep};
pub use reconstruct::{der, linearity_nre, nre, reconstruct_attention};
pub use solver::{dense_oracle_solve, nae, solve_intensities, Decomposition, SolverPath};
pub use sparsify::attention_to_sparsity;
pub use types::{
    AttentionMap, BlockMask, DenoisingSchedule, IntensityVector, SelectionDirection, SolverConfig, SparsityMap, TokenMask,
};
