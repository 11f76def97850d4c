//! Block masks from Top-K pattern selection plus preserved frame squares.

use std::cmp::Ordering;

use crate::basis::PatternId;
use crate::error::{Error, Result};
use crate::layout::GridLayout;
use crate::types::{BlockMask, SelectionDirection, TokenMask};

/// Ranks the merged diagonal and vertical pools and keeps the first `k`.
///
/// Ties fall back to family (diagonals first) then index, so the order is total.
pub fn topk_patterns(
    c_hat: &[f64],
    d_hat: &[f64],
    k: usize,
    direction: SelectionDirection,
) -> Vec<PatternId> {
    let mut pool: Vec<(f64, PatternId)> = c_hat
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, PatternId::parallel(i)))
        .chain(d_hat.iter().enumerate().map(|(i, &v)| (v, PatternId::vertical(i))))
        .collect();
    pool.sort_by(|(va, ia), (vb, ib)| {
        let by_value = match direction {
            SelectionDirection::Ascending => va.total_cmp(vb),
            SelectionDirection::Descending => vb.total_cmp(va),
        };
        match by_value {
            Ordering::Equal => ia.cmp(ib),
            other => other,
        }
    });
    pool.into_iter().take(k).map(|(_, id)| id).collect()
}

/// Pass set = union of selected supports and preserved frame squares.
pub fn build_block_mask(
    selected: &[PatternId],
    preserve_blocks: &[bool],
    layout: &GridLayout,
    step: u32,
    head: usize,
) -> Result<BlockMask> {
    if preserve_blocks.len() != layout.frames() {
        return Err(Error::mismatch(
            "frame preservation flags",
            layout.frames(),
            preserve_blocks.len(),
        ));
    }
    let mut mask = BlockMask::filled(layout.grid(), false, step, head);
    for id in selected {
        id.validate(layout)?;
        id.for_each_cell(layout, |i, j| mask.set(i, j, true));
    }
    for (r, _) in preserve_blocks.iter().enumerate().filter(|(_, keep)| **keep) {
        PatternId::block(r).for_each_cell(layout, |i, j| mask.set(i, j, true));
    }
    Ok(mask)
}

/// Opens the diagonal block of every block row that has no pass block, so
/// every query row keeps at least one key. Returns the number of blocks opened.
pub fn ensure_row_coverage(mask: &mut BlockMask) -> usize {
    let n = mask.side();
    let mut opened = 0;
    for i in 0..n {
        if !(0..n).any(|j| mask.get(i, j)) {
            mask.set(i, i, true);
            opened += 1;
        }
    }
    opened
}

/// Replicates every block decision over its `B × B` token region.
pub fn upsample_mask(mask: &BlockMask, layout: &GridLayout) -> Result<TokenMask> {
    if mask.side() != layout.grid() {
        return Err(Error::mismatch("block mask side", layout.grid(), mask.side()));
    }
    let b = layout.block_size();
    let side = layout.n_tokens();
    let mut pass = Vec::with_capacity(side * side);
    for p in 0..side {
        let bi = p / b;
        for q in 0..side {
            pass.push(mask.get(bi, q / b));
        }
    }
    TokenMask::new(side, pass)
}

/// Per-head masks of one layer at one step, in head order.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerMask {
    masks: Vec<BlockMask>,
}

impl LayerMask {
    pub fn heads(&self) -> usize {
        self.masks.len()
    }

    pub fn head(&self, h: usize) -> Option<&BlockMask> {
        self.masks.get(h)
    }

    pub fn iter(&self) -> impl Iterator<Item = &BlockMask> {
        self.masks.iter()
    }
}

pub fn concat_heads(masks: Vec<BlockMask>) -> Result<LayerMask> {
    if let Some(first) = masks.first() {
        for m in &masks[1..] {
            if m.side() != first.side() {
                return Err(Error::mismatch("head mask side", first.side(), m.side()));
            }
            if m.step != first.step {
                return Err(Error::mismatch("head mask step", first.step, m.step));
            }
        }
    }
    Ok(LayerMask { masks })
}

/// Skipped-block fraction `1 - computed / total`.
pub fn sparsity_ratio(mask: &BlockMask) -> f64 {
    1.0 - mask.pass_fraction()
}
