use crate::error::{Error, Result};

/// Token/block/frame arithmetic for one attention head.
///
/// The sparsity grid is `grid × grid` blocks of `block_size × block_size` tokens.
/// The block-diagonal family uses `frames` equal contiguous squares of side
/// `blocks_per_frame` on the main diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridLayout {
    n_tokens: usize,
    block_size: usize,
    grid: usize,
    frames: usize,
    blocks_per_frame: usize,
}

impl GridLayout {
    pub fn new(n_tokens: usize, block_size: usize, frames: usize) -> Result<Self> {
        if n_tokens == 0 || block_size == 0 || frames == 0 {
            return Err(Error::InvalidArgument(format!(
                "layout sizes must be positive (tokens={n_tokens}, block={block_size}, frames={frames})"
            )));
        }
        if !n_tokens.is_multiple_of(block_size) {
            return Err(Error::Divisibility {
                what: "block size vs token count",
                divisor: block_size,
                value: n_tokens,
            });
        }
        let grid = n_tokens / block_size;
        if !grid.is_multiple_of(frames) {
            return Err(Error::Divisibility {
                what: "frame count vs grid side",
                divisor: frames,
                value: grid,
            });
        }
        Ok(Self {
            n_tokens,
            block_size,
            grid,
            frames,
            blocks_per_frame: grid / frames,
        })
    }

    /// Layout defined directly on the block grid (one token per block).
    pub fn from_grid(grid: usize, frames: usize) -> Result<Self> {
        Self::new(grid, 1, frames)
    }

    pub fn n_tokens(&self) -> usize {
        self.n_tokens
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn blocks_per_frame(&self) -> usize {
        self.blocks_per_frame
    }

    /// Number of parallel-diagonal patterns, `2n - 1`.
    pub fn n_diagonals(&self) -> usize {
        2 * self.grid - 1
    }

    /// Total pattern-pool size `(2n - 1) + n + f`.
    pub fn pattern_count(&self) -> usize {
        self.n_diagonals() + self.grid + self.frames
    }

    /// Frame index containing block row/column `i`.
    pub fn frame_of(&self, i: usize) -> usize {
        i / self.blocks_per_frame
    }
}

/// Validating constructor mirroring [`GridLayout::new`].
pub fn make_layout(n_tokens: usize, block_size: usize, frames: usize) -> Result<GridLayout> {
    GridLayout::new(n_tokens, block_size, frames)
}
