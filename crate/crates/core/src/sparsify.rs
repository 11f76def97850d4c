//! Attention map → block sparsity map.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::layout::GridLayout;
use crate::matrix::Matrix;
use crate::types::{AttentionMap, SparsityMap};

/// Fraction of entries strictly below `eta` in every `B × B` block.
pub fn attention_to_sparsity(
    map: &AttentionMap,
    layout: &GridLayout,
    eta: f64,
) -> Result<SparsityMap> {
    if map.values.shape() != (layout.n_tokens(), layout.n_tokens()) {
        return Err(Error::mismatch(
            "attention map",
            format!("{0}x{0}", layout.n_tokens()),
            format!("{}x{}", map.values.rows(), map.values.cols()),
        ));
    }
    if !(eta >= 0.0) {
        return Err(Error::InvalidArgument(format!("eta must be >= 0, got {eta}")));
    }
    let n = layout.grid();
    let b = layout.block_size();
    let denom = (b * b) as f64;

    // One block row per task; counts are integers so the result does not
    // depend on scheduling.
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|bi| {
            let mut counts = vec![0usize; n];
            for x in 0..b {
                let row = map.values.row(bi * b + x);
                for (bj, count) in counts.iter_mut().enumerate() {
                    *count += row[bj * b..(bj + 1) * b]
                        .iter()
                        .filter(|&&a| a < eta)
                        .count();
                }
            }
            counts.into_iter().map(|c| c as f64 / denom).collect()
        })
        .collect();

    let values = Matrix::from_vec(n, n, rows.concat())?;
    Ok(SparsityMap {
        values,
        step: map.step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn attn(values: Matrix) -> AttentionMap {
        AttentionMap::new(values, 7).unwrap()
    }

    #[test]
    fn constant_maps() {
        let layout = GridLayout::new(256, 128, 1).unwrap();
        let s = attention_to_sparsity(&attn(Matrix::zeros(256, 256)), &layout, 1e-4).unwrap();
        assert_eq!(s.values, Matrix::filled(2, 2, 1.0));
        assert_eq!(s.step, 7);
        let s = attention_to_sparsity(&attn(Matrix::filled(256, 256, 1.0)), &layout, 1e-4).unwrap();
        assert_eq!(s.values, Matrix::zeros(2, 2));
    }

    #[test]
    fn counts_one_block() {
        let layout = GridLayout::new(4, 2, 1).unwrap();
        let mut m = Matrix::filled(4, 4, 1.0);
        m[(0, 0)] = 0.0;
        m[(0, 1)] = 0.0;
        m[(1, 0)] = 0.5;
        m[(1, 1)] = 0.5;
        let s = attention_to_sparsity(&attn(m), &layout, 1e-4).unwrap();
        assert_eq!(s.values[(0, 0)], 0.5);
        assert_eq!(s.values[(1, 1)], 0.0);
    }

    #[test]
    fn threshold_is_strict() {
        let layout = GridLayout::new(2, 2, 1).unwrap();
        let m = Matrix::filled(2, 2, 1e-4);
        let s = attention_to_sparsity(&attn(m), &layout, 1e-4).unwrap();
        assert_eq!(s.values[(0, 0)], 0.0);
    }

    #[test]
    fn rejects_wrong_dimensions() {
        let layout = GridLayout::new(4, 2, 1).unwrap();
        assert!(attention_to_sparsity(&attn(Matrix::zeros(6, 6)), &layout, 1e-4).is_err());
    }

    fn random_attention(seed: u64, side: usize) -> Matrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(side, side, |_, _| {
            let e: f64 = rng.random_range(-8.0..0.0);
            10f64.powf(e)
        })
    }

    proptest! {
        #[test]
        fn monotone_in_eta(seed in any::<u64>(), e1 in -8.0f64..0.0, e2 in -8.0f64..0.0) {
            let layout = GridLayout::new(8, 2, 2).unwrap();
            let a = attn(random_attention(seed, 8));
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            let s_lo = attention_to_sparsity(&a, &layout, 10f64.powf(lo)).unwrap();
            let s_hi = attention_to_sparsity(&a, &layout, 10f64.powf(hi)).unwrap();
            for (x, y) in s_lo.values.as_slice().iter().zip(s_hi.values.as_slice()) {
                prop_assert!(x <= y);
            }
        }

        #[test]
        fn scaling_up_never_increases_sparsity(seed in any::<u64>(), gamma in 1.0f64..100.0) {
            let layout = GridLayout::new(8, 4, 1).unwrap();
            let a = attn(random_attention(seed, 8));
            let scaled = attn(a.values.scaled(gamma));
            let s = attention_to_sparsity(&a, &layout, 1e-4).unwrap();
            let t = attention_to_sparsity(&scaled, &layout, 1e-4).unwrap();
            for (x, y) in t.values.as_slice().iter().zip(s.values.as_slice()) {
                prop_assert!(x <= y);
            }
            // Pure function.
            prop_assert_eq!(attention_to_sparsity(&a, &layout, 1e-4).unwrap(), s);
        }
    }
}
