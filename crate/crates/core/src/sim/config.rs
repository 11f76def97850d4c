//! Simulator configuration files.
//!
//! ```toml
//! [layout]
//! tokens = 128
//! block = 4
//! frames = 4
//!
//! [schedule]          # optional, defaults 50 / 12 / 10
//! steps = 50
//! warmup = 12
//! interval = 10
//!
//! [solver]            # every key optional
//! lambda = 1e-8
//! eta = 1e-4
//! tau_e = 0.5
//! top_k = 8
//! direction = "ascending"
//!
//! [trajectory]
//! baseline = 1.0
//! noise_sigma = 0.02
//! warmup_chaos = 0.1
//! seed = 7
//! random = { diagonals = 3, verticals = 2 }   # optional generated mixture
//!
//! [trajectory.knots]  # family letter C/D/E and 0-based index
//! C31 = [[1, -0.3], [50, -0.2]]
//! D4 = [[1, -0.4]]
//!
//! [run]
//! heads = 2
//! value_dim = 8
//! dump_masks = false
//! ```
//!
//! Explicit knots override generated ones for the same pattern.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::run::RunOptions;
use super::trajectory::{random_structured, TrajectorySpec};
use crate::basis::{Family, PatternId};
use crate::error::{Error, Result};
use crate::layout::GridLayout;
use crate::types::{DenoisingSchedule, SelectionDirection, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub layout: GridLayout,
    pub schedule: DenoisingSchedule,
    pub solver: SolverConfig,
    pub trajectory: TrajectorySpec,
    pub run: RunOptions,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    layout: RawLayout,
    #[serde(default)]
    schedule: RawSchedule,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    trajectory: RawTrajectory,
    #[serde(default)]
    run: RawRun,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayout {
    tokens: usize,
    block: usize,
    #[serde(default = "one")]
    frames: usize,
}

fn one() -> usize {
    1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSchedule {
    steps: u32,
    warmup: u32,
    interval: u32,
}

impl Default for RawSchedule {
    fn default() -> Self {
        let d = DenoisingSchedule::default();
        Self {
            steps: d.total_steps(),
            warmup: d.warmup(),
            interval: d.interval(),
        }
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    lambda: Option<f64>,
    eta: Option<f64>,
    tau_e: Option<f64>,
    top_k: Option<usize>,
    direction: Option<SelectionDirection>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawTrajectory {
    baseline: f64,
    noise_sigma: f64,
    warmup_chaos: f64,
    chaos_until: Option<u32>,
    seed: u64,
    random: Option<RawRandom>,
    knots: BTreeMap<String, Vec<(u32, f64)>>,
}

impl Default for RawTrajectory {
    fn default() -> Self {
        Self {
            baseline: 1.0,
            noise_sigma: 0.0,
            warmup_chaos: 0.0,
            chaos_until: None,
            seed: 0,
            random: None,
            knots: BTreeMap::new(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRandom {
    diagonals: usize,
    verticals: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawRun {
    heads: usize,
    value_dim: usize,
    dump_masks: bool,
}

impl Default for RawRun {
    fn default() -> Self {
        let d = RunOptions::default();
        Self {
            heads: d.heads,
            value_dim: d.value_dim,
            dump_masks: d.dump_masks,
        }
    }
}

/// Parses keys such as `C12`, `D3` or `E0`.
pub fn parse_pattern_key(key: &str) -> Option<PatternId> {
    let (head, digits) = key.split_at(key.char_indices().nth(1)?.0);
    let family = Family::from_name(head)?;
    let index = digits.parse().ok()?;
    Some(PatternId { family, index })
}

impl SimConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse { line, msg, .. } => Error::Parse {
                path: path.to_path_buf(),
                line,
                msg,
            },
            other => other,
        })
    }

    /// Parse errors carry an empty path and the 1-based line of the problem.
    pub fn parse(text: &str) -> Result<Self> {
        let raw: Raw = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map_or(1, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            Error::Parse {
                path: Default::default(),
                line,
                msg: e.message().to_string(),
            }
        })?;
        let layout = GridLayout::new(raw.layout.tokens, raw.layout.block, raw.layout.frames)?;
        let schedule = DenoisingSchedule::new(raw.schedule.steps, raw.schedule.warmup, raw.schedule.interval)?;
        let d = SolverConfig::default();
        let solver = SolverConfig {
            lambda: raw.solver.lambda.unwrap_or(d.lambda),
            eta: raw.solver.eta.unwrap_or(d.eta),
            tau_e: raw.solver.tau_e.unwrap_or(d.tau_e),
            top_k: raw.solver.top_k.unwrap_or(d.top_k),
            selection_direction: raw.solver.direction.unwrap_or(d.selection_direction),
        };
        solver.validate()?;

        let t = raw.trajectory;
        let mut spec = match t.random {
            Some(r) => random_structured(&layout, &schedule, r.diagonals, r.verticals, t.seed)?,
            None => TrajectorySpec::new(t.seed),
        };
        for (key, knots) in t.knots {
            let id = parse_pattern_key(&key)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown pattern key `{key}`")))?;
            spec.knots.insert(id, knots);
        }
        spec.baseline = t.baseline;
        spec.noise_sigma = t.noise_sigma;
        spec.warmup_chaos = t.warmup_chaos;
        spec.chaos_until = t.chaos_until.unwrap_or(schedule.warmup());
        spec.seed = t.seed;
        spec.validate(&layout)?;

        let run = RunOptions {
            heads: raw.run.heads,
            value_dim: raw.run.value_dim,
            dump_masks: raw.run.dump_masks,
        };
        Ok(Self {
            layout,
            schedule,
            solver,
            trajectory: spec,
            run,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEMO: &str = r#"
[layout]
tokens = 64
block = 4
frames = 2

[solver]
top_k = 6
direction = "descending"

[trajectory]
noise_sigma = 0.01
seed = 3
random = { diagonals = 2, verticals = 2 }

[trajectory.knots]
C15 = [[1, -0.3], [50, -0.2]]

[run]
heads = 3
"#;

    #[test]
    fn parses_demo() {
        let c = SimConfig::parse(DEMO).unwrap();
        assert_eq!(c.layout.grid(), 16);
        assert_eq!(c.schedule, DenoisingSchedule::default());
        assert_eq!(c.solver.top_k, 6);
        assert_eq!(c.solver.selection_direction, SelectionDirection::Descending);
        assert_eq!(c.solver.lambda, 1e-8);
        assert_eq!(c.trajectory.knots[&PatternId::parallel(15)], vec![(1, -0.3), (50, -0.2)]);
        assert_eq!(c.trajectory.chaos_until, 12);
        assert_eq!(c.run.heads, 3);
        assert_eq!(c.run.value_dim, 8);
    }

    #[test]
    fn pattern_keys() {
        assert_eq!(parse_pattern_key("C12"), Some(PatternId::parallel(12)));
        assert_eq!(parse_pattern_key("D0"), Some(PatternId::vertical(0)));
        assert_eq!(parse_pattern_key("E3"), Some(PatternId::block(3)));
        assert_eq!(parse_pattern_key("X1"), None);
        assert_eq!(parse_pattern_key("C"), None);
        assert_eq!(parse_pattern_key(""), None);
    }

    #[test]
    fn errors_carry_lines() {
        let bad = "[layout]\ntokens = 64\nblock = \"four\"\n";
        match SimConfig::parse(bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(SimConfig::parse("[layout]\ntokens = 64\nblock = 5\n").is_err());
        let unknown = DEMO.replace("C15", "Q15");
        assert!(SimConfig::parse(&unknown).is_err());
    }
}
