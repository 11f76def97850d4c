//! Linear extrapolation of diagonal/vertical intensities between re-estimations,
//! and the static keep/drop decision for block-diagonal regions.

use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::types::IntensityVector;

/// Continues the line through `(t_prev, value_prev)` and `(t_curr, value_curr)` to `t`.
pub fn extrapolate(value_prev: f64, value_curr: f64, t_prev: u32, t_curr: u32, t: u32) -> Result<f64> {
    if t_prev >= t_curr {
        return Err(Error::InvalidArgument(format!(
            "extrapolation needs t_prev < t_curr (got {t_prev}, {t_curr})"
        )));
    }
    if t <= t_curr {
        return Err(Error::InvalidArgument(format!(
            "extrapolation target {t} must lie after t_curr = {t_curr}"
        )));
    }
    let slope = (value_curr - value_prev) / f64::from(t_curr - t_prev);
    Ok(value_curr + slope * f64::from(t - t_curr))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictedStep {
    pub step: u32,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
}

/// Predicted `c` and `d` for every step in `window`; `e` is never extrapolated.
pub fn predict_window(
    x_prev: &IntensityVector,
    x_curr: &IntensityVector,
    window: RangeInclusive<u32>,
) -> Result<Vec<PredictedStep>> {
    if x_prev.c.len() != x_curr.c.len() || x_prev.d.len() != x_curr.d.len() {
        return Err(Error::mismatch(
            "intensity pair",
            format!("({}, {})", x_prev.c.len(), x_prev.d.len()),
            format!("({}, {})", x_curr.c.len(), x_curr.d.len()),
        ));
    }
    if *window.start() != x_curr.step + 1 {
        return Err(Error::InvalidArgument(format!(
            "prediction window must start at {} (got {})",
            x_curr.step + 1,
            window.start()
        )));
    }
    let (tp, tc) = (x_prev.step, x_curr.step);
    let line = |prev: &[f64], curr: &[f64], t: u32| -> Result<Vec<f64>> {
        prev.iter()
            .zip(curr)
            .map(|(&a, &b)| extrapolate(a, b, tp, tc, t))
            .collect()
    };
    window
        .map(|t| {
            Ok(PredictedStep {
                step: t,
                c: line(&x_prev.c, &x_curr.c, t)?,
                d: line(&x_prev.d, &x_curr.d, t)?,
            })
        })
        .collect()
}

/// Frame `r` is kept iff `min(e_warm_prev[r], e_warm_last[r]) > tau_e`.
pub fn block_diag_decision(e_warm_prev: &[f64], e_warm_last: &[f64], tau_e: f64) -> Result<Vec<bool>> {
    if e_warm_prev.len() != e_warm_last.len() {
        return Err(Error::mismatch(
            "block-diagonal intensities",
            e_warm_prev.len(),
            e_warm_last.len(),
        ));
    }
    Ok(e_warm_prev
        .iter()
        .zip(e_warm_last)
        .map(|(a, b)| a.min(*b) > tau_e)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn extrapolate_examples() {
        assert_eq!(extrapolate(0.5, 0.5, 12, 22, 30).unwrap(), 0.5);
        assert!((extrapolate(0.4, 0.6, 22, 32, 37).unwrap() - 0.7).abs() < 1e-15);
        assert!(extrapolate(0.4, 0.6, 22, 22, 37).is_err());
        assert!(extrapolate(0.4, 0.6, 22, 32, 32).is_err());
    }

    fn iv(c: Vec<f64>, d: Vec<f64>, step: u32) -> IntensityVector {
        IntensityVector { c, d, e: vec![0.3], step }
    }

    #[test]
    fn constant_pair_predicts_constant() {
        let a = iv(vec![0.1, 0.2, 0.3], vec![0.4, 0.5], 12);
        let b = IntensityVector { step: 22, ..a.clone() };
        let out = predict_window(&a, &b, 23..=32).unwrap();
        assert_eq!(out.len(), 10);
        assert!(out.windows(2).all(|w| w[0].step < w[1].step));
        for p in &out {
            assert_eq!(p.c, b.c);
            assert_eq!(p.d, b.d);
        }
        assert!(predict_window(&a, &b, 24..=32).is_err());
        let short = iv(vec![0.1], vec![0.4, 0.5], 12);
        assert!(predict_window(&short, &b, 23..=32).is_err());
    }

    #[test]
    fn block_diag_examples() {
        assert_eq!(block_diag_decision(&[0.9], &[0.8], 0.5).unwrap(), vec![true]);
        assert_eq!(block_diag_decision(&[0.5], &[0.9], 0.5).unwrap(), vec![false]);
        assert_eq!(block_diag_decision(&[0.2], &[0.9], 0.5).unwrap(), vec![false]);
        assert!(block_diag_decision(&[0.2, 0.3], &[0.9], 0.5).is_err());
    }

    proptest! {
        #[test]
        fn affine_invariance(a in -5.0f64..5.0, b in -5.0f64..5.0, v0 in -1.0f64..1.0,
                             v1 in -1.0f64..1.0, gap in 1u32..20, ahead in 1u32..20) {
            let (t0, t1) = (10, 10 + gap);
            let t = t1 + ahead;
            let lhs = extrapolate(a * v0 + b, a * v1 + b, t0, t1, t).unwrap();
            let rhs = a * extrapolate(v0, v1, t0, t1, t).unwrap() + b;
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        }

        #[test]
        fn exact_on_lines(icpt in -2.0f64..2.0, slope in -0.1f64..0.1, t0 in 1u32..30, gap in 1u32..10, ahead in 1u32..15) {
            let f = |t: u32| icpt + slope * f64::from(t);
            let t1 = t0 + gap;
            let got = extrapolate(f(t0), f(t1), t0, t1, t1 + ahead).unwrap();
            prop_assert!((got - f(t1 + ahead)).abs() < 1e-12);
        }

        #[test]
        fn block_diag_monotone(a in -1.0f64..1.0, b in -1.0f64..1.0, da in 0.0f64..1.0,
                               db in 0.0f64..1.0, tau in -1.0f64..1.0, dtau in 0.0f64..1.0) {
            let base = block_diag_decision(&[a], &[b], tau).unwrap()[0];
            let raised = block_diag_decision(&[a + da], &[b + db], tau).unwrap()[0];
            let stricter = block_diag_decision(&[a], &[b], tau + dtau).unwrap()[0];
            prop_assert!(!base || raised);
            prop_assert!(!stricter || base);
        }
    }
}
