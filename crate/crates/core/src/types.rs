//! Shared domain types.

use crate::error::{Error, Result};
use crate::layout::GridLayout;
use crate::matrix::Matrix;

/// Post-softmax attention weights for one head at one denoising step.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    pub values: Matrix,
    pub step: u32,
}

impl AttentionMap {
    pub fn new(values: Matrix, step: u32) -> Result<Self> {
        if !values.is_square() {
            return Err(Error::mismatch(
                "attention map",
                "square matrix",
                format!("{}x{}", values.rows(), values.cols()),
            ));
        }
        if values.as_slice().iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidArgument(
                "attention weights must be finite and non-negative".into(),
            ));
        }
        Ok(Self { values, step })
    }

    pub fn side(&self) -> usize {
        self.values.rows()
    }
}

/// Per-block fraction of sub-threshold attention entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityMap {
    pub values: Matrix,
    pub step: u32,
}

impl SparsityMap {
    /// Wraps a square matrix, rejecting entries outside `[0, 1]`.
    pub fn new(values: Matrix, step: u32) -> Result<Self> {
        if !values.is_square() {
            return Err(Error::mismatch(
                "sparsity map",
                "square matrix",
                format!("{}x{}", values.rows(), values.cols()),
            ));
        }
        if let Some(bad) = values
            .as_slice()
            .iter()
            .find(|v| !(**v >= 0.0 && **v <= 1.0))
        {
            return Err(Error::InvalidArgument(format!(
                "sparsity value {bad} outside [0, 1]"
            )));
        }
        Ok(Self { values, step })
    }

    pub fn side(&self) -> usize {
        self.values.rows()
    }

    pub(crate) fn check_layout(&self, layout: &GridLayout) -> Result<()> {
        if self.side() != layout.grid() {
            return Err(Error::mismatch("sparsity map side", layout.grid(), self.side()));
        }
        Ok(())
    }
}

/// Fitted pattern intensities `[c, d, e]` at one step.
///
/// `c[k]` belongs to the diagonal with offset `k - (n - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityVector {
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub e: Vec<f64>,
    pub step: u32,
}

impl IntensityVector {
    pub fn zeros(layout: &GridLayout, step: u32) -> Self {
        Self {
            c: vec![0.0; layout.n_diagonals()],
            d: vec![0.0; layout.grid()],
            e: vec![0.0; layout.frames()],
            step,
        }
    }

    pub fn len(&self) -> usize {
        self.c.len() + self.d.len() + self.e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Concatenation `[c, d, e]`, the column order of the design matrix.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        out.extend_from_slice(&self.c);
        out.extend_from_slice(&self.d);
        out.extend_from_slice(&self.e);
        out
    }

    pub fn unflatten(flat: &[f64], layout: &GridLayout, step: u32) -> Result<Self> {
        if flat.len() != layout.pattern_count() {
            return Err(Error::mismatch(
                "intensity vector",
                layout.pattern_count(),
                flat.len(),
            ));
        }
        let (c, rest) = flat.split_at(layout.n_diagonals());
        let (d, e) = rest.split_at(layout.grid());
        Ok(Self {
            c: c.to_vec(),
            d: d.to_vec(),
            e: e.to_vec(),
            step,
        })
    }

    pub fn check_layout(&self, layout: &GridLayout) -> Result<()> {
        if self.c.len() != layout.n_diagonals()
            || self.d.len() != layout.grid()
            || self.e.len() != layout.frames()
        {
            return Err(Error::mismatch(
                "intensity vector lengths",
                format!(
                    "({}, {}, {})",
                    layout.n_diagonals(),
                    layout.grid(),
                    layout.frames()
                ),
                format!("({}, {}, {})", self.c.len(), self.d.len(), self.e.len()),
            ));
        }
        Ok(())
    }
}

/// Block-level pass/skip decision for one head at one step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockMask {
    side: usize,
    pass: Vec<bool>,
    pub step: u32,
    pub head: usize,
}

impl BlockMask {
    pub fn new(side: usize, pass: Vec<bool>, step: u32, head: usize) -> Result<Self> {
        if pass.len() != side * side {
            return Err(Error::mismatch("block mask", side * side, pass.len()));
        }
        Ok(Self {
            side,
            pass,
            step,
            head,
        })
    }

    pub fn filled(side: usize, value: bool, step: u32, head: usize) -> Self {
        Self {
            side,
            pass: vec![value; side * side],
            step,
            head,
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.pass[i * self.side + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.pass[i * self.side + j] = value;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.pass
    }

    pub fn pass_count(&self) -> usize {
        self.pass.iter().filter(|p| **p).count()
    }

    /// Fraction of blocks that are computed.
    pub fn pass_fraction(&self) -> f64 {
        if self.pass.is_empty() {
            return 0.0;
        }
        self.pass_count() as f64 / self.pass.len() as f64
    }

    /// Pass set as `(row, col)` pairs in row-major order.
    pub fn pass_set(&self) -> Vec<(usize, usize)> {
        (0..self.side)
            .flat_map(|i| (0..self.side).map(move |j| (i, j)))
            .filter(|&(i, j)| self.get(i, j))
            .collect()
    }
}

/// Token-resolution boolean mask; `true` means the entry is computed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenMask {
    side: usize,
    pass: Vec<bool>,
}

impl TokenMask {
    pub fn new(side: usize, pass: Vec<bool>) -> Result<Self> {
        if pass.len() != side * side {
            return Err(Error::mismatch("token mask", side * side, pass.len()));
        }
        Ok(Self { side, pass })
    }

    pub fn filled(side: usize, value: bool) -> Self {
        Self {
            side,
            pass: vec![value; side * side],
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn get(&self, p: usize, q: usize) -> bool {
        self.pass[p * self.side + q]
    }

    pub fn row(&self, p: usize) -> &[bool] {
        &self.pass[p * self.side..(p + 1) * self.side]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.pass
    }
}

/// Total steps, warm-up length and re-estimation interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenoisingSchedule {
    total_steps: u32,
    warmup: u32,
    interval: u32,
}

impl DenoisingSchedule {
    pub fn new(total_steps: u32, warmup: u32, interval: u32) -> Result<Self> {
        if warmup < 2 || warmup >= total_steps {
            return Err(Error::InvalidArgument(format!(
                "warm-up must satisfy 2 <= m < T (m={warmup}, T={total_steps})"
            )));
        }
        if interval == 0 {
            return Err(Error::InvalidArgument("interval must be at least 1".into()));
        }
        Ok(Self {
            total_steps,
            warmup,
            interval,
        })
    }

    pub fn total_steps(&self) -> u32 {
        self.total_steps
    }

    pub fn warmup(&self) -> u32 {
        self.warmup
    }

    pub fn interval(&self) -> u32 {
        self.interval
    }

    /// `m + i * Δt` for every `i >= 0` not exceeding `T`.
    pub fn prediction_steps(&self) -> Vec<u32> {
        (self.warmup..=self.total_steps)
            .step_by(self.interval as usize)
            .collect()
    }

    pub fn is_prediction_step(&self, t: u32) -> bool {
        t >= self.warmup && (t - self.warmup).is_multiple_of(self.interval)
    }
}

impl Default for DenoisingSchedule {
    fn default() -> Self {
        Self {
            total_steps: 50,
            warmup: 12,
            interval: 10,
        }
    }
}

/// Ranking order for Top-K pattern selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionDirection {
    #[default]
    Ascending,
    Descending,
}

impl std::str::FromStr for SelectionDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ascending" | "asc" => Ok(Self::Ascending),
            "descending" | "desc" => Ok(Self::Descending),
            other => Err(Error::InvalidArgument(format!(
                "unknown selection direction `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Tikhonov parameter added to the Gram diagonal.
    pub lambda: f64,
    /// Attention entries strictly below this count as sparse.
    pub eta: f64,
    /// Block-diagonal regions are kept only when both warm-up intensities exceed this.
    pub tau_e: f64,
    pub top_k: usize,
    pub selection_direction: SelectionDirection,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "eta must be finite and >= 0, got {}",
                self.eta
            )));
        }
        if self.tau_e.is_nan() {
            return Err(Error::InvalidArgument("tau_e is NaN".into()));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidArgument("top_k must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-8,
            eta: 1e-4,
            tau_e: 0.5,
            top_k: 200,
            selection_direction: SelectionDirection::Ascending,
        }
    }
}
