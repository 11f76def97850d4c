//! End-to-end emulation of the warm-up / sparse denoising loop.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::attention::masked_softmax;
use super::derive_seed;
use super::synth::synth_attention;
use super::trajectory::TrajectorySpec;
use crate::error::{Error, Result};
use crate::io::{format_csv, write_atomic};
use crate::layout::GridLayout;
use crate::mask::{build_block_mask, ensure_row_coverage, sparsity_ratio, topk_patterns, upsample_mask};
use crate::matrix::Matrix;
use crate::predictor::{block_diag_decision, predict_window, PredictedStep};
use crate::reconstruct::{der, nre, reconstruct_attention};
use crate::solver::{nae, solve_intensities, SolverPath};
use crate::sparsify::attention_to_sparsity;
use crate::types::{AttentionMap, BlockMask, DenoisingSchedule, IntensityVector, SelectionDirection, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub heads: usize,
    /// Width of the shared random value matrix.
    pub value_dim: usize,
    /// Keep every sparse-phase block mask in the report.
    pub dump_masks: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            heads: 1,
            value_dim: 8,
            dump_masks: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Warmup,
    Sparse,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::Warmup => "warmup",
            Phase::Sparse => "sparse",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub head: usize,
    pub step: u32,
    pub phase: Phase,
    /// Fit residual of a fresh decomposition of the true map.
    pub nae: f64,
    /// Residual of the predicted intensities against the true map.
    pub pred_nae: Option<f64>,
    /// Only at re-estimation steps.
    pub nre: Option<f64>,
    pub der: f64,
    pub sparsity_ratio: f64,
    pub output_error: f64,
    /// Set where the loop itself solved (last two warm-up steps and re-estimations).
    pub solver_path: Option<SolverPath>,
    pub selected: usize,
    pub preserved_frames: usize,
    pub coverage_fixes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunEcho {
    pub n_tokens: usize,
    pub block_size: usize,
    pub frames: usize,
    pub total_steps: u32,
    pub warmup: u32,
    pub interval: u32,
    pub lambda: f64,
    pub eta: f64,
    pub tau_e: f64,
    pub top_k: usize,
    pub direction: SelectionDirection,
    pub heads: usize,
    pub seed: u64,
    pub value_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceReport {
    pub config: RunEcho,
    /// Sorted by `(head, step)`.
    pub records: Vec<StepRecord>,
    pub masks: Vec<BlockMask>,
}

impl TraceReport {
    pub fn sparse_records(&self) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter(|r| r.phase == Phase::Sparse)
    }

    pub fn mean_output_error(&self) -> f64 {
        mean(self.sparse_records().map(|r| r.output_error))
    }

    pub fn mean_nae(&self) -> f64 {
        mean(self.sparse_records().map(|r| r.nae))
    }

    pub fn max_nre(&self) -> Option<f64> {
        self.records.iter().filter_map(|r| r.nre).reduce(f64::max)
    }

    /// One row per `(head, step)`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from(
            "head,step,phase,nae,pred_nae,nre,der,sparsity_ratio,output_error,solver_path,selected,preserved_frames,coverage_fixes\n",
        );
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.head,
                r.step,
                r.phase.name(),
                r.nae,
                opt(r.pred_nae),
                opt(r.nre),
                r.der,
                r.sparsity_ratio,
                r.output_error,
                r.solver_path.map(|p| p.name()).unwrap_or(""),
                r.selected,
                r.preserved_frames,
                r.coverage_fixes
            );
        }
        out
    }

    /// Sparse-phase aggregates per head, then over all heads.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "head,steps,mean_nae,max_nae,mean_pred_nae,max_nre,mean_der,mean_sparsity_ratio,mean_output_error,max_output_error\n",
        );
        let mut row = |label: String, recs: Vec<&StepRecord>| {
            let max = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0, f64::max);
            let _ = writeln!(
                out,
                "{label},{},{},{},{},{},{},{},{},{}",
                recs.len(),
                mean(recs.iter().map(|r| r.nae)),
                max(&mut recs.iter().map(|r| r.nae)),
                mean(recs.iter().filter_map(|r| r.pred_nae)),
                max(&mut recs.iter().filter_map(|r| r.nre)),
                mean(recs.iter().map(|r| r.der)),
                mean(recs.iter().map(|r| r.sparsity_ratio)),
                mean(recs.iter().map(|r| r.output_error)),
                max(&mut recs.iter().map(|r| r.output_error)),
            );
        };
        for h in 0..self.config.heads {
            row(h.to_string(), self.sparse_records().filter(|r| r.head == h).collect());
        }
        row("all".into(), self.sparse_records().collect());
        out
    }

    pub fn config_csv(&self) -> String {
        let c = &self.config;
        let dir = match c.direction {
            SelectionDirection::Ascending => "ascending",
            SelectionDirection::Descending => "descending",
        };
        format!(
            "key,value\nn_tokens,{}\nblock_size,{}\nframes,{}\ntotal_steps,{}\nwarmup,{}\ninterval,{}\nlambda,{}\neta,{}\ntau_e,{}\ntop_k,{}\ndirection,{dir}\nheads,{}\nseed,{}\nvalue_dim,{}\n",
            c.n_tokens, c.block_size, c.frames, c.total_steps, c.warmup, c.interval, c.lambda,
            c.eta, c.tau_e, c.top_k, c.heads, c.seed, c.value_dim
        )
    }

    /// Writes `trace.csv`, `summary.csv`, `config.csv` and, if masks were
    /// kept, `masks/h<head>_t<step>.csv`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_atomic(&dir.join("trace.csv"), self.trace_csv().as_bytes())?;
        write_atomic(&dir.join("summary.csv"), self.summary_csv().as_bytes())?;
        write_atomic(&dir.join("config.csv"), self.config_csv().as_bytes())?;
        if !self.masks.is_empty() {
            let mdir = dir.join("masks");
            std::fs::create_dir_all(&mdir).map_err(|e| Error::io(&mdir, e))?;
            for m in &self.masks {
                let bits = Matrix::from_fn(m.side(), m.side(), |i, j| f64::from(u8::from(m.get(i, j))));
                let path = mdir.join(format!("h{}_t{}.csv", m.head, m.step));
                write_atomic(&path, format_csv(&bits).as_bytes())?;
            }
        }
        Ok(())
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = it.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Runs every head through warm-up and the sparse phase.
///
/// Head `h` perturbs its maps with a seed derived from `(spec.seed, h)`, so
/// heads share trajectories but not noise.
pub fn run_denoising(
    schedule: &DenoisingSchedule,
    layout: &GridLayout,
    cfg: &SolverConfig,
    spec: &TrajectorySpec,
    opts: &RunOptions,
) -> Result<TraceReport> {
    cfg.validate()?;
    spec.validate(layout)?;
    if opts.heads == 0 || opts.value_dim == 0 {
        return Err(Error::InvalidArgument("heads and value_dim must be positive".into()));
    }
    if layout.n_tokens() as f64 * cfg.eta > 0.1 {
        return Err(Error::InvalidArgument(format!(
            "synthetic maps need n_tokens * eta <= 0.1 (got {} * {})",
            layout.n_tokens(),
            cfg.eta
        )));
    }
    let heads: Vec<(Vec<StepRecord>, Vec<BlockMask>)> = (0..opts.heads)
        .into_par_iter()
        .map(|h| run_head(schedule, layout, cfg, spec, opts, h))
        .collect::<Result<_>>()?;
    let mut records = Vec::new();
    let mut masks = Vec::new();
    for (r, m) in heads {
        records.extend(r);
        masks.extend(m);
    }
    records.sort_by_key(|r| (r.head, r.step));
    Ok(TraceReport {
        config: RunEcho {
            n_tokens: layout.n_tokens(),
            block_size: layout.block_size(),
            frames: layout.frames(),
            total_steps: schedule.total_steps(),
            warmup: schedule.warmup(),
            interval: schedule.interval(),
            lambda: cfg.lambda,
            eta: cfg.eta,
            tau_e: cfg.tau_e,
            top_k: cfg.top_k,
            direction: cfg.selection_direction,
            heads: opts.heads,
            seed: spec.seed,
            value_dim: opts.value_dim,
        },
        records,
        masks,
    })
}

/// The trajectory as seen by head `head`: same knots, head-specific noise seed.
pub fn head_spec(spec: &TrajectorySpec, head: usize) -> TrajectorySpec {
    spec.reseeded(derive_seed(spec.seed, head as u64))
}

fn run_head(
    schedule: &DenoisingSchedule,
    layout: &GridLayout,
    cfg: &SolverConfig,
    spec: &TrajectorySpec,
    opts: &RunOptions,
    head: usize,
) -> Result<(Vec<StepRecord>, Vec<BlockMask>)> {
    let spec = head_spec(spec, head);
    let mut step = 0;
    let mut state = HeadState::new(layout, &spec, opts, head);
    let out = (|| {
        let m = schedule.warmup();
        let mut warm_maps = Vec::new();
        let mut warm_fits = Vec::new();
        let mut a_hat = None;
        for t in 1..=m {
            step = t;
            let a = synth_attention(&spec, layout, t)?;
            let s = attention_to_sparsity(&a, layout, cfg.eta)?;
            let fit = solve_intensities(&s, layout, cfg)?;
            let mut rec = state.blank(t, Phase::Warmup);
            rec.nae = nae(&s, &fit.intensities, layout)?;
            if t + 1 >= m {
                rec.solver_path = Some(fit.path);
                warm_fits.push(fit.intensities);
            }
            if t == m {
                a_hat = Some(a);
            }
            state.records.push(rec);
            warm_maps.push(s);
        }
        let s_ref = warm_maps.last().expect("warmup >= 2").clone();
        for (rec, s) in state.records.iter_mut().zip(&warm_maps) {
            rec.der = der(s, &s_ref)?;
        }
        let mut a_hat = a_hat.expect("warmup >= 2");
        let mut curr = warm_fits.pop().expect("two warm-up fits");
        let mut prev = warm_fits.pop().expect("two warm-up fits");
        let preserve = block_diag_decision(&prev.e, &curr.e, cfg.tau_e)?;
        let preserved = preserve.iter().filter(|p| **p).count();
        let mut next_tp = m + schedule.interval();
        let mut window: Vec<PredictedStep> = Vec::new();

        for t in m + 1..=schedule.total_steps() {
            step = t;
            if t == curr.step + 1 {
                let end = next_tp.min(schedule.total_steps());
                window = predict_window(&prev, &curr, t..=end)?;
            }
            let pred = &window[(t - curr.step - 1) as usize];
            let selected = topk_patterns(&pred.c, &pred.d, cfg.top_k, cfg.selection_direction);
            let mut mask = build_block_mask(&selected, &preserve, layout, t, head)?;
            let fixes = ensure_row_coverage(&mut mask);
            let token_mask = upsample_mask(&mask, layout)?;

            let a = synth_attention(&spec, layout, t)?;
            let s = attention_to_sparsity(&a, layout, cfg.eta)?;
            let scores = Matrix::from_vec(
                a.side(),
                a.side(),
                a.values.as_slice().iter().map(|v| v.ln()).collect(),
            )?;
            let probs = masked_softmax(&scores, &token_mask)?;
            let full_out = a.values.matmul(&state.values)?;
            let masked_out = probs.matmul(&state.values)?;

            let mut rec = state.blank(t, Phase::Sparse);
            rec.output_error = masked_out.frobenius_distance(&full_out)? / full_out.frobenius_norm();
            rec.nae = nae(&s, &solve_intensities(&s, layout, cfg)?.intensities, layout)?;
            let predicted = IntensityVector {
                c: pred.c.clone(),
                d: pred.d.clone(),
                e: curr.e.clone(),
                step: t,
            };
            rec.pred_nae = Some(nae(&s, &predicted, layout)?);
            rec.der = der(&s, &s_ref)?;
            rec.sparsity_ratio = sparsity_ratio(&mask);
            rec.selected = selected.len();
            rec.preserved_frames = preserved;
            rec.coverage_fixes = fixes;

            if t == next_tp {
                a_hat = reconstruct_attention(&AttentionMap { values: probs, step: t }, &token_mask, &a_hat)?;
                let s_hat = attention_to_sparsity(&a_hat, layout, cfg.eta)?;
                rec.nre = Some(nre(&s_hat, &s)?);
                let fit = solve_intensities(&s_hat, layout, cfg)?;
                rec.solver_path = Some(fit.path);
                prev = std::mem::replace(&mut curr, fit.intensities);
                next_tp += schedule.interval();
            }
            state.records.push(rec);
            if opts.dump_masks {
                state.masks.push(mask);
            }
        }
        Ok(())
    })();
    out.map_err(|e| Error::Simulation {
        step,
        head,
        source: Box::new(e),
    })?;
    Ok((state.records, state.masks))
}

struct HeadState {
    head: usize,
    values: Matrix,
    records: Vec<StepRecord>,
    masks: Vec<BlockMask>,
}

impl HeadState {
    fn new(layout: &GridLayout, spec: &TrajectorySpec, opts: &RunOptions, head: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, u64::MAX));
        let values = Matrix::from_fn(layout.n_tokens(), opts.value_dim, |_, _| StandardNormal.sample(&mut rng));
        Self {
            head,
            values,
            records: Vec::new(),
            masks: Vec::new(),
        }
    }

    fn blank(&self, step: u32, phase: Phase) -> StepRecord {
        StepRecord {
            head: self.head,
            step,
            phase,
            nae: 0.0,
            pred_nae: None,
            nre: None,
            der: 0.0,
            sparsity_ratio: 0.0,
            output_error: 0.0,
            solver_path: None,
            selected: 0,
            preserved_frames: 0,
            coverage_fixes: 0,
        }
    }
}
