//! Ground-truth intensity trajectories for synthetic attention maps.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::{Family, PatternId};
use crate::error::{Error, Result};
use crate::layout::GridLayout;
use crate::types::{DenoisingSchedule, IntensityVector};

/// Per-pattern piecewise-linear intensities plus perturbation settings.
///
/// The clean map at step `t` is `baseline · J + Σ value_k(t) · P_k`, where
/// `J` is the all-ones grid. Patterns without knots contribute nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    pub knots: BTreeMap<PatternId, Vec<(u32, f64)>>,
    pub baseline: f64,
    /// Standard deviation of the Gaussian perturbation added to every block.
    pub noise_sigma: f64,
    /// Peak amplitude of the extra warm-up perturbation.
    pub warmup_chaos: f64,
    /// Last step that receives warm-up perturbation (normally the warm-up length).
    pub chaos_until: u32,
    pub seed: u64,
}

impl TrajectorySpec {
    pub fn new(seed: u64) -> Self {
        Self {
            knots: BTreeMap::new(),
            baseline: 1.0,
            noise_sigma: 0.0,
            warmup_chaos: 0.0,
            chaos_until: 0,
            seed,
        }
    }

    /// Adds (or replaces) the knot list of one pattern.
    pub fn with_knots(mut self, id: PatternId, knots: Vec<(u32, f64)>) -> Self {
        self.knots.insert(id, knots);
        self
    }

    pub fn validate(&self, layout: &GridLayout) -> Result<()> {
        for (id, knots) in &self.knots {
            id.validate(layout)?;
            if knots.is_empty() {
                return Err(Error::InvalidArgument(format!("{id}: empty knot list")));
            }
            if knots.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(Error::InvalidArgument(format!(
                    "{id}: knot steps must be strictly increasing"
                )));
            }
            if knots.iter().any(|(_, v)| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{id}: non-finite knot value")));
            }
        }
        let scalars = [
            ("baseline", self.baseline),
            ("noise_sigma", self.noise_sigma),
            ("warmup_chaos", self.warmup_chaos),
        ];
        for (name, v) in scalars {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be finite")));
            }
        }
        if self.noise_sigma < 0.0 || self.warmup_chaos < 0.0 {
            return Err(Error::InvalidArgument(
                "noise_sigma and warmup_chaos must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Interpolated intensity of `id` at `t`; held constant outside the knots.
    pub fn value(&self, id: PatternId, t: u32) -> f64 {
        self.knots.get(&id).map_or(0.0, |k| interpolate(k, t))
    }

    /// Ground-truth coefficients at `t`, with the baseline folded into the
    /// verticals (the columns sum to `J`).
    pub fn intensities_at(&self, layout: &GridLayout, t: u32) -> IntensityVector {
        let mut x = IntensityVector::zeros(layout, t);
        x.d.iter_mut().for_each(|d| *d = self.baseline);
        for (id, knots) in &self.knots {
            let v = interpolate(knots, t);
            match id.family {
                Family::ParallelDiagonal => x.c[id.index] += v,
                Family::Vertical => x.d[id.index] += v,
                Family::BlockDiagonal => x.e[id.index] += v,
            }
        }
        x
    }

    /// The same trajectories under a different perturbation seed.
    pub fn reseeded(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

fn interpolate(knots: &[(u32, f64)], t: u32) -> f64 {
    let first = knots[0];
    if t <= first.0 {
        return first.1;
    }
    for w in knots.windows(2) {
        let ((ta, va), (tb, vb)) = (w[0], w[1]);
        if t <= tb {
            return va + (vb - va) * f64::from(t - ta) / f64::from(tb - ta);
        }
    }
    knots[knots.len() - 1].1
}

/// Knot steps at 1, the warm-up end and every prediction step, ending at `T`.
fn window_knot_steps(schedule: &DenoisingSchedule) -> Vec<u32> {
    let mut steps = vec![1, schedule.warmup()];
    steps.extend(schedule.prediction_steps().into_iter().skip(1));
    if *steps.last().unwrap() != schedule.total_steps() {
        steps.push(schedule.total_steps());
    }
    steps.dedup();
    steps
}

/// Piecewise-linear knots whose slope changes only at prediction steps.
///
/// Each new slope differs from the previous one by at most `jitter` of the
/// previous magnitude, and the trajectory never leaves `range`.
pub fn piecewise_knots(
    schedule: &DenoisingSchedule,
    range: (f64, f64),
    jitter: f64,
    rng: &mut impl Rng,
) -> Vec<(u32, f64)> {
    let steps = window_knot_steps(schedule);
    let (lo, hi) = range;
    let width = hi - lo;
    let growth = (1.0 + jitter).powi(steps.len() as i32);
    let max_slope = width / (4.0 * growth * f64::from(schedule.total_steps()));
    let mut slope = rng.random_range(0.3 * max_slope..max_slope);
    if rng.random_bool(0.5) {
        slope = -slope;
    }
    let mut value = lo + width * rng.random_range(0.25..0.75);
    let mut knots = vec![(steps[0], value)];
    for w in steps.windows(2) {
        value += slope * f64::from(w[1] - w[0]);
        knots.push((w[1], value));
        slope *= 1.0 + rng.random_range(-jitter..=jitter);
    }
    knots
}

/// Random mixture of a few diagonals and verticals on a sparse baseline,
/// plus mild frame structure. Diagonals are drawn within `|δ| ≤ n/2`.
pub fn random_structured(
    layout: &GridLayout,
    schedule: &DenoisingSchedule,
    diagonals: usize,
    verticals: usize,
    seed: u64,
) -> Result<TrajectorySpec> {
    let n = layout.grid();
    let near = n / 2;
    let pool = 2 * near + 1;
    if diagonals > pool || verticals > n {
        return Err(Error::InvalidArgument(format!(
            "cannot draw {diagonals} diagonals and {verticals} verticals at n = {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = TrajectorySpec::new(seed);
    spec.chaos_until = schedule.warmup();
    for k in sample(&mut rng, pool, diagonals) {
        let id = PatternId::parallel(n - 1 - near + k);
        spec.knots.insert(id, piecewise_knots(schedule, (-0.45, -0.2), 0.09, &mut rng));
    }
    for j in sample(&mut rng, n, verticals) {
        let knots = piecewise_knots(schedule, (-0.45, -0.2), 0.09, &mut rng);
        spec.knots.insert(PatternId::vertical(j), knots);
    }
    for r in 0..layout.frames() {
        let knots = piecewise_knots(schedule, (-0.1, 0.0), 0.09, &mut rng);
        spec.knots.insert(PatternId::block(r), knots);
    }
    Ok(spec)
}

/// Noise-free mixture whose active intensities move linearly by one quantum
/// `1/B²` per step, so quantized maps reproduce the clean maps exactly.
///
/// `diagonals` holds `(index, start quanta, direction)`; likewise `verticals`.
/// Intensities are `-quanta / B²`.
pub fn exact_linear(
    layout: &GridLayout,
    total_steps: u32,
    diagonals: &[(usize, i64, i64)],
    verticals: &[(usize, i64, i64)],
) -> TrajectorySpec {
    let q = (layout.block_size() * layout.block_size()) as f64;
    let line = |start: i64, dir: i64| {
        let end = start + dir * i64::from(total_steps - 1);
        vec![(1, -(start as f64) / q), (total_steps, -(end as f64) / q)]
    };
    let mut spec = TrajectorySpec::new(0);
    for &(k, start, dir) in diagonals {
        spec.knots.insert(PatternId::parallel(k), line(start, dir));
    }
    for &(k, start, dir) in verticals {
        spec.knots.insert(PatternId::vertical(k), line(start, dir));
    }
    spec
}
