//! Timing sweep: structured normal equations versus the materialized design matrix.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::DEFAULT_DESIGN_CAP_BYTES;
use crate::error::{Error, Result};
use crate::layout::GridLayout;
use crate::matrix::Matrix;
use crate::solver::{assemble, solve_intensities, solve_materialized};
use crate::types::{SolverConfig, SparsityMap};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub frames: usize,
    /// Timed samples per measurement; the median is reported.
    pub repetitions: usize,
    /// Each sample repeats its call until at least this long has elapsed.
    pub min_sample: Duration,
    pub lambda: f64,
    pub seed: u64,
    pub skip_oracle: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![32, 64, 128, 256],
            frames: 4,
            repetitions: 5,
            min_sample: Duration::from_millis(20),
            lambda: 1e-8,
            seed: 0,
            skip_oracle: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    /// Seconds per call.
    pub structured_s: f64,
    pub oracle_s: Option<f64>,
    pub assembly_s: f64,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Median seconds per call of `f`.
fn time(reps: usize, min_sample: Duration, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        let mut calls = 0u32;
        loop {
            f()?;
            calls += 1;
            if start.elapsed() >= min_sample {
                break;
            }
        }
        samples.push(start.elapsed().as_secs_f64() / f64::from(calls));
    }
    Ok(median(&mut samples))
}

pub fn random_map(n: usize, seed: u64) -> SparsityMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = Matrix::from_fn(n, n, |_, _| rng.random_range(0.0..=1.0));
    SparsityMap { values, step: 0 }
}

pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.repetitions == 0 {
        return Err(Error::InvalidArgument("repetitions must be at least 1".into()));
    }
    let solver = SolverConfig {
        lambda: cfg.lambda,
        ..SolverConfig::default()
    };
    cfg.sizes
        .iter()
        .map(|&n| {
            let layout = GridLayout::from_grid(n, cfg.frames)?;
            let map = random_map(n, cfg.seed ^ n as u64);
            let structured_s = time(cfg.repetitions, cfg.min_sample, || {
                solve_intensities(&map, &layout, &solver).map(drop)
            })?;
            let assembly_s = time(cfg.repetitions, cfg.min_sample, || {
                assemble(&map, &layout, cfg.lambda).map(drop)
            })?;
            let oracle_s = if cfg.skip_oracle {
                None
            } else {
                Some(time(cfg.repetitions, cfg.min_sample, || {
                    solve_materialized(&map, &layout, cfg.lambda, DEFAULT_DESIGN_CAP_BYTES).map(drop)
                })?)
            };
            Ok(BenchRow {
                n,
                structured_s,
                oracle_s,
                assembly_s,
            })
        })
        .collect()
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("n,structured_s,oracle_s,assembly_s\n");
    for r in rows {
        let oracle = r.oracle_s.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", r.n, r.structured_s, oracle, r.assembly_s);
    }
    out
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}
