//! Synthetic attention maps with a known block-sparsity structure.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::derive_seed;
use super::trajectory::TrajectorySpec;
use crate::error::Result;
use crate::layout::GridLayout;
use crate::matrix::Matrix;
use crate::types::AttentionMap;

/// Weight given to informative entries before row normalization.
const INFORMATIVE: f64 = 1.0;
/// Weight given to sparse entries before row normalization.
const SPARSE: f64 = 1e-12;

/// Noise-free map `baseline · J + Σ value_k(t) · P_k` on the block grid.
pub fn clean_map(spec: &TrajectorySpec, layout: &GridLayout, t: u32) -> Result<Matrix> {
    spec.validate(layout)?;
    crate::basis::synthesize(&spec.intensities_at(layout, t), layout)
}

/// Clean map plus Gaussian noise and decaying warm-up perturbation, clipped to `[0, 1]`.
pub fn target_map(spec: &TrajectorySpec, layout: &GridLayout, t: u32) -> Result<Matrix> {
    let mut s = clean_map(spec, layout, t)?;
    let chaos = if t <= spec.chaos_until && spec.chaos_until > 0 {
        let m = f64::from(spec.chaos_until);
        spec.warmup_chaos * (m - f64::from(t) + 1.0) / m
    } else {
        0.0
    };
    let sigma = (spec.noise_sigma * spec.noise_sigma + chaos * chaos).sqrt();
    if sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, u64::from(t)));
        let normal = Normal::new(0.0, sigma).expect("finite sigma");
        for v in s.as_mut_slice() {
            *v += normal.sample(&mut rng);
        }
    }
    for v in s.as_mut_slice() {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(s)
}

/// Dense token-level attention whose block sparsity reproduces the
/// quantized target map.
///
/// Block `(i, j)` receives `round(S(i,j) · B²)` sparse entries and the rest
/// informative ones; rows are then normalized to sum 1. Informative entries
/// end up at least `1/N`, sparse ones below `1e-12`, so thresholds
/// `eta ≤ 0.1 / N` classify every entry as intended. A token row that would
/// have no informative entry gets its diagonal entry made informative.
pub fn synth_attention(spec: &TrajectorySpec, layout: &GridLayout, t: u32) -> Result<AttentionMap> {
    let target = target_map(spec, layout, t)?;
    let n = layout.grid();
    let b = layout.block_size();
    let side = layout.n_tokens();
    let cells = b * b;
    let mut a = Matrix::filled(side, side, INFORMATIVE);
    for bi in 0..n {
        for bj in 0..n {
            let k = (target[(bi, bj)] * cells as f64).round() as usize;
            for q in 0..k.min(cells) {
                let x = q % b;
                let y = (q / b + x) % b;
                a.row_mut(bi * b + x)[bj * b + y] = SPARSE;
            }
        }
    }
    for p in 0..side {
        let row = a.row_mut(p);
        if row.iter().all(|&v| v < INFORMATIVE) {
            row[p] = INFORMATIVE;
        }
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= sum);
    }
    AttentionMap::new(a, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::PatternId;
    use crate::reconstruct::der;
    use crate::sparsify::attention_to_sparsity;
    use crate::types::SparsityMap;

    #[test]
    fn single_vertical_round_trips() {
        let l = GridLayout::new(32, 4, 2).unwrap();
        let spec = TrajectorySpec::new(5).with_knots(PatternId::vertical(1), vec![(1, -1.0)]);
        let a = synth_attention(&spec, &l, 3).unwrap();
        for row in 0..32 {
            let s: f64 = a.values.row(row).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        let s = attention_to_sparsity(&a, &l, 1e-4).unwrap();
        let cells = 16.0;
        for i in 0..8 {
            for j in 0..8 {
                let v = s.values[(i, j)];
                if j == 1 {
                    assert_eq!(v, 0.0);
                } else {
                    assert!(v >= 1.0 - 1.0 / cells, "({i},{j}) = {v}");
                }
            }
        }
    }

    #[test]
    fn quantized_target_is_recovered() {
        let l = GridLayout::new(64, 8, 4).unwrap();
        let mut spec = TrajectorySpec::new(11)
            .with_knots(PatternId::parallel(7), vec![(1, -0.3), (40, -0.6)])
            .with_knots(PatternId::vertical(3), vec![(1, -0.25)]);
        spec.noise_sigma = 0.05;
        let a = synth_attention(&spec, &l, 9).unwrap();
        let s = attention_to_sparsity(&a, &l, 1e-4).unwrap();
        let target = target_map(&spec, &l, 9).unwrap();
        for (got, want) in s.values.as_slice().iter().zip(target.as_slice()) {
            assert!((got - want).abs() <= 0.5 / 64.0 + 1e-12);
        }
    }

    #[test]
    fn deterministic_in_seed_and_step() {
        let l = GridLayout::new(16, 4, 1).unwrap();
        let mut spec = TrajectorySpec::new(2).with_knots(PatternId::parallel(3), vec![(1, -0.5)]);
        spec.noise_sigma = 0.1;
        let a = synth_attention(&spec, &l, 4).unwrap();
        assert_eq!(a, synth_attention(&spec, &l, 4).unwrap());
        assert_ne!(a, synth_attention(&spec, &l, 5).unwrap());
        assert_ne!(a, synth_attention(&spec.reseeded(3), &l, 4).unwrap());
    }

    #[test]
    fn warmup_chaos_raises_consecutive_drift() {
        let l = GridLayout::new(64, 4, 4).unwrap();
        let base = TrajectorySpec::new(4)
            .with_knots(PatternId::vertical(2), vec![(1, -0.4), (50, -0.2)])
            .with_knots(PatternId::parallel(15), vec![(1, -0.3)]);
        let mut chaotic = base.clone();
        chaotic.warmup_chaos = 0.2;
        chaotic.chaos_until = 12;
        let sm = |spec: &TrajectorySpec, t| {
            attention_to_sparsity(&synth_attention(spec, &l, t).unwrap(), &l, 1e-4).unwrap()
        };
        let drift = |spec: &TrajectorySpec| -> f64 {
            (2..=12).map(|t| der(&sm(spec, t), &sm(spec, t - 1)).unwrap()).sum()
        };
        assert!(drift(&chaotic) > drift(&base));
        let _: SparsityMap = sm(&base, 13);
    }
}
