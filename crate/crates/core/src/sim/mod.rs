//! Synthetic denoising-loop simulator.

pub mod attention;
pub mod config;
pub mod cost;
pub mod run;
pub mod synth;
pub mod trajectory;

pub use attention::{masked_attention, masked_softmax};
pub use config::SimConfig;
pub use cost::{cost_model, reference_layout, CostDims, CostSummary};
pub use run::{head_spec, run_denoising, Phase, RunOptions, StepRecord, TraceReport};
pub use synth::{clean_map, synth_attention, target_map};
pub use trajectory::{exact_linear, piecewise_knots, random_structured, TrajectorySpec};

/// SplitMix64 finalizer over `a` and `b`.
pub(crate) fn derive_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
