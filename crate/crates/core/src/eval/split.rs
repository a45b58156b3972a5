use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::grid::{Geometry, Mask};
use crate::solve::{tile_layout, Tile, TileConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitAxis {
    /// West (low columns) trains, east tests.
    Vertical,
    /// South (low rows) trains, north tests.
    Horizontal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErosionMode {
    /// Erode each block only from the split line.
    SplitLine,
    /// Also erode from the outer grid edges.
    AllEdges,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub axis: SplitAxis,
    /// Buffer in cells.
    pub buffer: usize,
    pub erosion: ErosionMode,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { axis: SplitAxis::Vertical, buffer: 96, erosion: ErosionMode::SplitLine }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train_block: Mask,
    pub test_block: Mask,
    pub train_core: Mask,
    pub test_core: Mask,
}

/// Splits the grid at the median row or column and erodes both blocks by the
/// buffer.
pub fn block_split(geom: &Geometry, spec: &SplitSpec) -> Result<Split> {
    let n = match spec.axis {
        SplitAxis::Vertical => geom.width,
        SplitAxis::Horizontal => geom.height,
    };
    let d = spec.buffer;
    if 2 * d >= n {
        return Err(param(format!("buffer {d} leaves no core on an axis of {n} cells")));
    }
    let mid = n / 2;
    let edge = if spec.erosion == ErosionMode::AllEdges { d } else { 0 };
    let inside_edges = |r: usize, c: usize| {
        edge == 0 || (r >= edge && c >= edge && r + edge < geom.height && c + edge < geom.width)
    };
    let along = |r: usize, c: usize| match spec.axis {
        SplitAxis::Vertical => c,
        SplitAxis::Horizontal => r,
    };
    let train_block = Mask::from_index_fn(*geom, |r, c| along(r, c) < mid);
    let test_block = train_block.not();
    let train_core = Mask::from_index_fn(*geom, |r, c| along(r, c) + d < mid && inside_edges(r, c));
    let test_core = Mask::from_index_fn(*geom, |r, c| along(r, c) >= mid + d && inside_edges(r, c));
    if !train_core.any() || !test_core.any() {
        return Err(param("block split produced an empty core"));
    }
    Ok(Split { train_block, test_block, train_core, test_core })
}

/// Row/column bounds `[r0, r1) x [c0, c1)` of the set cells.
pub fn bounding_box(mask: &Mask) -> Option<(usize, usize, usize, usize)> {
    let w = mask.geometry().width;
    let mut b: Option<(usize, usize, usize, usize)> = None;
    for i in mask.indices() {
        let (r, c) = (i / w, i % w);
        b = Some(match b {
            None => (r, r + 1, c, c + 1),
            Some((r0, r1, c0, c1)) => (r0.min(r), r1.max(r + 1), c0.min(c), c1.max(c + 1)),
        });
    }
    b
}

/// Tiler output over the bounding box of `region`, in grid coordinates.
pub fn tiles_for_region(region: &Mask, cfg: &TileConfig) -> Result<Vec<Tile>> {
    let (r0, r1, c0, c1) = bounding_box(region).ok_or_else(|| param("tiling an empty region"))?;
    let sub = region.geometry().window(r0, c0, r1 - r0, c1 - c0)?;
    Ok(tile_layout(&sub, cfg)?
        .into_iter()
        .map(|t| Tile {
            row: t.row + r0,
            col: t.col + c0,
            core_row0: t.core_row0 + r0,
            core_row1: t.core_row1 + r0,
            core_col0: t.core_col0 + c0,
            core_col1: t.core_col1 + c0,
            ..t
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub tiles_checked: usize,
    /// Indices into the tile list whose core leaves the train core.
    pub violations: Vec<usize>,
}

impl LeakageReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Flags tiles whose core is not entirely inside `train_core`.
pub fn check_tile_leakage(tiles: &[Tile], train_core: &Mask) -> LeakageReport {
    let g = train_core.geometry();
    let violations = tiles
        .iter()
        .enumerate()
        .filter(|(_, t)| {
            t.core_row1 > g.height
                || t.core_col1 > g.width
                || (t.core_row0..t.core_row1).any(|r| (t.core_col0..t.core_col1).any(|c| !train_core.get(r, c)))
        })
        .map(|(i, _)| i)
        .collect();
    LeakageReport { tiles_checked: tiles.len(), violations }
}
