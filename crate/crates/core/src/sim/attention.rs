//! Dense attention with an additive block mask, emulated at token level.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::types::TokenMask;

/// Row-wise softmax restricted to passing entries; blocked entries get 0.
pub fn masked_softmax(scores: &Matrix, mask: &TokenMask) -> Result<Matrix> {
    let (rows, cols) = scores.shape();
    if rows != cols || mask.side() != rows {
        return Err(Error::mismatch(
            "score matrix vs mask",
            format!("{0}x{0}", mask.side()),
            format!("{rows}x{cols}"),
        ));
    }
    let mut out = Matrix::zeros(rows, cols);
    for p in 0..rows {
        let pass = mask.row(p);
        let row = scores.row(p);
        let max = row
            .iter()
            .zip(pass)
            .filter(|(_, &ok)| ok)
            .map(|(&v, _)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::InvalidArgument(format!("row {p} has no passing entry")));
        }
        let dst = out.row_mut(p);
        let mut sum = 0.0;
        for q in 0..cols {
            if pass[q] {
                dst[q] = (row[q] - max).exp();
                sum += dst[q];
            }
        }
        dst.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(out)
}

/// `softmax(scores + M) · values` with `M = 0` on passing entries and `-∞` elsewhere.
pub fn masked_attention(scores: &Matrix, mask: &TokenMask, values: &Matrix) -> Result<Matrix> {
    if values.rows() != scores.cols() {
        return Err(Error::mismatch("value rows", scores.cols(), values.rows()));
    }
    masked_softmax(scores, mask)?.matmul(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-3.0..3.0))
    }

    fn dense_softmax(s: &Matrix) -> Matrix {
        let mut out = s.clone();
        for p in 0..s.rows() {
            let row = out.row_mut(p);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            row.iter_mut().for_each(|v| *v = (*v - max).exp());
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= sum);
        }
        out
    }

    #[test]
    fn all_pass_is_plain_attention() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random(8, 8, &mut rng);
        let v = random(8, 4, &mut rng);
        let got = masked_attention(&s, &TokenMask::filled(8, true), &v).unwrap();
        let want = dense_softmax(&s).matmul(&v).unwrap();
        assert!(got.max_abs_diff(&want).unwrap() < 1e-12);
    }

    #[test]
    fn diagonal_only_copies_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random(6, 6, &mut rng);
        let v = random(6, 3, &mut rng);
        let mask = TokenMask::new(6, (0..36).map(|k| k / 6 == k % 6).collect()).unwrap();
        let got = masked_attention(&s, &mask, &v).unwrap();
        assert!(got.max_abs_diff(&v).unwrap() < 1e-15);
    }

    #[test]
    fn matches_large_negative_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let s = random(8, 8, &mut rng);
            let v = random(8, 4, &mut rng);
            let mut pass: Vec<bool> = (0..64).map(|_| rng.random_bool(0.5)).collect();
            for p in 0..8 {
                pass[p * 8 + rng.random_range(0..8)] = true;
            }
            let mask = TokenMask::new(8, pass.clone()).unwrap();
            let shifted = Matrix::from_fn(8, 8, |p, q| {
                if pass[p * 8 + q] {
                    s[(p, q)]
                } else {
                    s[(p, q)] - 1e9
                }
            });
            let want = dense_softmax(&shifted).matmul(&v).unwrap();
            let got = masked_attention(&s, &mask, &v).unwrap();
            assert!(got.max_abs_diff(&want).unwrap() < 1e-9);
        }
    }

    #[test]
    fn blocked_row_is_rejected() {
        let s = Matrix::zeros(2, 2);
        let mask = TokenMask::new(2, vec![true, false, false, false]).unwrap();
        assert!(masked_softmax(&s, &mask).is_err());
        assert!(masked_attention(&s, &TokenMask::filled(2, true), &Matrix::zeros(3, 1)).is_err());
    }
}
