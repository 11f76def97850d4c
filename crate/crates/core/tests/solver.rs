mod common;

use common::{formula_map, nae_explicit, rel_l2, ridge_qr, ridge_spectral};
use moddit::solver::{
    assemble_normal_matrix, assemble_rhs, dense_oracle_solve, materialized_normal_system, objective, solve_materialized,
};
use moddit::*;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn map(values: Vec<f64>, n: usize) -> SparsityMap {
    SparsityMap::new(Matrix::from_vec(n, n, values).unwrap(), 0).unwrap()
}

fn random_map(n: usize, rng: &mut ChaCha8Rng) -> SparsityMap {
    map((0..n * n).map(|_| rng.random_range(0.0..=1.0)).collect(), n)
}

fn cfg(lambda: f64) -> SolverConfig {
    SolverConfig {
        lambda,
        ..SolverConfig::default()
    }
}

// Reference values from the spectral oracle in `common`.
#[test]
fn frozen_formula_map_fits() {
    let cases = [
        (8, 2, 4.1075757528289936e-1, 1.3843705541109064, 3.4090216573269405e-1, [0.27908148764903684, 0.08525198449208429]),
    ];
    for (n, f, want_nae, want_norm, want_c0, want_e) in cases {
        let s = map(formula_map(n), n);
        let l = GridLayout::from_grid(n, f).unwrap();
        let fit = solve_intensities(&s, &l, &cfg(1e-8)).unwrap();
        let x = fit.intensities.flatten();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((nae(&s, &fit.intensities, &l).unwrap() - want_nae).abs() < 1e-10);
        assert!((norm - want_norm).abs() < 1e-10);
        assert!((x[0] - want_c0).abs() < 1e-10);
        for (got, want) in fit.intensities.e.iter().zip(want_e) {
            assert!((got - want).abs() < 1e-10);
        }
    }
    let s = map(formula_map(16), 16);
    let l = GridLayout::from_grid(16, 4).unwrap();
    let fit = solve_intensities(&s, &l, &cfg(1e-8)).unwrap();
    assert!((nae(&s, &fit.intensities, &l).unwrap() - 4.4298520986163187e-1).abs() < 1e-10);
    let x = fit.intensities.flatten();
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!((norm - 1.8797050696045094).abs() < 1e-10);
    assert!((x[0] - 3.1939436633258445e-1).abs() < 1e-10);
}

#[test]
fn structured_and_dense_agree_with_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for (n, f) in [(1, 1), (2, 2), (8, 1), (8, 2), (8, 4), (12, 3), (16, 4), (16, 8), (32, 2)] {
        let l = GridLayout::from_grid(n, f).unwrap();
        let s = random_map(n, &mut rng);
        let want = ridge_spectral(n, f, s.values.as_slice(), 1e-8);
        let fast = solve_intensities(&s, &l, &cfg(1e-8)).unwrap().intensities.flatten();
        let dense = dense_oracle_solve(&s, &l, 1e-8).unwrap().flatten();
        assert!(rel_l2(&fast, &want) < 1e-10, "n={n} f={f}");
        assert!(rel_l2(&dense, &want) < 1e-10, "n={n} f={f}");
        // The stacked QR route loses about eps * kappa^2.
        assert!(rel_l2(&ridge_qr(n, f, s.values.as_slice(), 1e-8), &want) < 1e-6);
    }
}

#[test]
fn rhs_matches_explicit_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (n, f) in [(8, 2), (16, 1), (32, 4), (32, 32)] {
        let l = GridLayout::from_grid(n, f).unwrap();
        let s = random_map(n, &mut rng);
        let want = common::design(n, f).transpose() * DVector::from_column_slice(s.values.as_slice());
        let got = assemble_rhs(&s, &l).unwrap();
        for (a, b) in got.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn gram_matches_explicit_product_up_to_32() {
    for n in [1usize, 2, 3, 4, 6, 8, 16, 32] {
        for f in (1..=n).filter(|f| n % f == 0) {
            let l = GridLayout::from_grid(n, f).unwrap();
            let m = common::design(n, f);
            let want = m.transpose() * &m;
            let got = assemble_normal_matrix(&l, 0.0);
            for i in 0..l.pattern_count() {
                for j in 0..l.pattern_count() {
                    assert_eq!(got[(i, j)], want[(i, j)], "n={n} f={f} ({i},{j})");
                }
            }
        }
    }
}

#[test]
fn exact_vertical_pattern() {
    let l = GridLayout::from_grid(8, 2).unwrap();
    let s = map((0..64).map(|k| if k % 8 == 1 { 1.0 } else { 0.0 }).collect(), 8);
    let got = solve_intensities(&s, &l, &cfg(1e-8)).unwrap();
    let want = dense_oracle_solve(&s, &l, 1e-8).unwrap();
    assert!(rel_l2(&got.intensities.flatten(), &want.flatten()) < 1e-8);
    assert!(nae(&s, &got.intensities, &l).unwrap() < 1e-6);
}

#[test]
fn exact_three_family_mixture() {
    let l = GridLayout::from_grid(8, 2).unwrap();
    let mut x = IntensityVector::zeros(&l, 0);
    x.c[7] = 0.3;
    x.d[2] = 0.5;
    x.e[0] = 0.2;
    let s = SparsityMap::new(synthesize(&x, &l).unwrap(), 0).unwrap();
    let fit = solve_intensities(&s, &l, &cfg(1e-8)).unwrap();
    assert!(nae(&s, &fit.intensities, &l).unwrap() <= 1e-6);
}

#[test]
fn zero_map_and_single_block() {
    let l = GridLayout::from_grid(4, 2).unwrap();
    let z = map(vec![0.0; 16], 4);
    let fit = solve_intensities(&z, &l, &cfg(1e-8)).unwrap();
    assert!(fit.intensities.flatten().iter().all(|v| *v == 0.0));
    assert!(dense_oracle_solve(&z, &l, 1e-8).unwrap().flatten().iter().all(|v| *v == 0.0));
    assert!(matches!(nae(&z, &fit.intensities, &l), Err(Error::ZeroNorm(_))));

    let one = GridLayout::from_grid(1, 1).unwrap();
    let s = map(vec![0.6], 1);
    let (gram, rhs) = materialized_normal_system(&s, &one, 1e-8, 1 << 20).unwrap();
    assert_eq!(gram, Matrix::from_fn(3, 3, |i, j| 1.0 + if i == j { 1e-8 } else { 0.0 }));
    assert_eq!(rhs, vec![0.6; 3]);
    let x = dense_oracle_solve(&s, &one, 1e-8).unwrap().flatten();
    assert!((x[0] - x[1]).abs() < 1e-14 && (x[1] - x[2]).abs() < 1e-14);
    assert!((x[0] - 0.2).abs() < 1e-8);
    let y = solve_intensities(&s, &one, &cfg(1e-8)).unwrap().intensities.flatten();
    assert!(rel_l2(&y, &x) < 1e-8);
}

#[test]
fn nae_matches_explicit_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let l = GridLayout::from_grid(16, 2).unwrap();
    for _ in 0..5 {
        let s = random_map(16, &mut rng);
        let x = solve_intensities(&s, &l, &cfg(1e-8)).unwrap().intensities;
        let want = nae_explicit(16, 2, s.values.as_slice(), &x.flatten());
        assert!((nae(&s, &x, &l).unwrap() - want).abs() < 1e-10);
    }
    let s = random_map(16, &mut rng);
    assert!((nae(&s, &IntensityVector::zeros(&l, 0), &l).unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn fifty_seeds_at_sixteen() {
    let l = GridLayout::from_grid(16, 4).unwrap();
    for seed in 0..50 {
        let s = random_map(16, &mut ChaCha8Rng::seed_from_u64(seed));
        let fast = solve_intensities(&s, &l, &cfg(1e-8)).unwrap().intensities.flatten();
        let dense = dense_oracle_solve(&s, &l, 1e-8).unwrap().flatten();
        assert!(rel_l2(&fast, &dense) < 1e-8, "seed {seed}");
    }
}

#[test]
fn residual_optimality() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (n, f) in [(8, 2), (16, 4)] {
        let l = GridLayout::from_grid(n, f).unwrap();
        let s = random_map(n, &mut rng);
        let x = solve_intensities(&s, &l, &cfg(1e-8)).unwrap().intensities;
        let base = objective(&s, &x, &l, 1e-8).unwrap();
        let flat = x.flatten();
        for _ in 0..100 {
            let dir: Vec<f64> = (0..flat.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            let moved: Vec<f64> = flat.iter().zip(&dir).map(|(a, d)| a + 1e-3 * d / norm).collect();
            let y = IntensityVector::unflatten(&moved, &l, 0).unwrap();
            assert!(objective(&s, &y, &l, 1e-8).unwrap() >= base);
        }
    }
}

#[test]
fn operation_counts_scale() {
    let sizes = [32usize, 64, 128, 256];
    let mut fast = Vec::new();
    let mut naive = Vec::new();
    for &n in &sizes {
        let l = GridLayout::from_grid(n, 4).unwrap();
        let s = SparsityMap::new(Matrix::filled(n, n, 0.5), 0).unwrap();
        fast.push(solve_intensities(&s, &l, &cfg(1e-8)).unwrap().ops as f64);
        if n <= 64 {
            naive.push(solve_materialized(&s, &l, 1e-8, 1 << 30).unwrap().ops as f64);
        }
    }
    let xs: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    let slope = moddit::bench::loglog_slope(&xs, &fast);
    assert!((2.5..=3.5).contains(&slope), "structured slope {slope}");
    let naive_slope = moddit::bench::loglog_slope(&xs[..2], &naive);
    assert!(naive_slope >= 3.5, "naive slope {naive_slope}");
    assert!(naive[1] > 10.0 * fast[1]);
}

#[test]
fn rejects_bad_input() {
    let l = GridLayout::from_grid(4, 2).unwrap();
    let s = map(vec![0.5; 16], 4);
    assert!(solve_intensities(&s, &l, &cfg(-1.0)).is_err());
    assert!(solve_intensities(&s, &l, &cfg(f64::NAN)).is_err());
    assert!(solve_intensities(&map(vec![0.5; 9], 3), &l, &cfg(1e-8)).is_err());
    assert!(matches!(
        moddit::solver::dense_oracle_solve_capped(&s, &l, 1e-8, 8),
        Err(Error::MemoryCap { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn structured_matches_oracle(seed in any::<u64>(), which in 0usize..9) {
        let n = [8, 16, 32][which % 3];
        let f = [1, 2, 4][which / 3];
        let l = GridLayout::from_grid(n, f).unwrap();
        let s = random_map(n, &mut ChaCha8Rng::seed_from_u64(seed));
        let fast = solve_intensities(&s, &l, &cfg(1e-8)).unwrap();
        let dense = dense_oracle_solve(&s, &l, 1e-8).unwrap();
        prop_assert!(rel_l2(&fast.intensities.flatten(), &dense.flatten()) < 1e-8);
        let a = nae(&s, &fast.intensities, &l).unwrap();
        let b = nae(&s, &dense, &l).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn in_span_maps_are_reproduced(seed in any::<u64>(), which in 0usize..6) {
        let (n, f) = [(4, 2), (8, 1), (8, 4), (16, 2), (16, 16), (32, 4)][which];
        let l = GridLayout::from_grid(n, f).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let flat: Vec<f64> = (0..l.pattern_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let truth = synthesize(&IntensityVector::unflatten(&flat, &l, 0).unwrap(), &l).unwrap();
        prop_assume!(truth.frobenius_norm() > 1e-3);
        let s = SparsityMap { values: truth.clone(), step: 0 };
        let fit = solve_intensities(&s, &l, &cfg(1e-8)).unwrap();
        prop_assert!(nae(&s, &fit.intensities, &l).unwrap() <= 1e-6);
        let recon = synthesize(&fit.intensities, &l).unwrap();
        prop_assert!(recon.frobenius_distance(&truth).unwrap() / truth.frobenius_norm() <= 1e-6);
    }
}
