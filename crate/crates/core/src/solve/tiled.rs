use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{solve_variational, Problem, ReconState, SolveSettings};
use crate::error::{dim, param, Result};
use crate::grid::{Geometry, RasterGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TileConfig {
    pub patch: usize,
    pub stride: usize,
    /// Inset of each tile's core from its edges, in cells.
    pub border: usize,
}

impl Default for TileConfig {
    fn default() -> Self {
        Self { patch: 256, stride: 64, border: 96 }
    }
}

impl TileConfig {
    pub fn validate(&self) -> Result<()> {
        if 2 * self.border >= self.patch {
            return Err(param(format!("tile border {} leaves no core in a {} patch", self.border, self.patch)));
        }
        if self.stride == 0 || self.stride > self.patch - 2 * self.border {
            return Err(param(format!(
                "stride {} must lie in 1..={} so cores leave no gaps",
                self.stride,
                self.patch - 2 * self.border
            )));
        }
        Ok(())
    }
}

/// A square-ish window of the grid and the part of it that is kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tile {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
    /// Core rows `[core_row0, core_row1)` in grid coordinates.
    pub core_row0: usize,
    pub core_row1: usize,
    pub core_col0: usize,
    pub core_col1: usize,
}

/// `(start, len, core_start, core_end)` along one axis. Axes no longer than a
/// patch get one tile whose core is the whole axis; otherwise cores of the
/// first and last tiles reach the grid edge.
fn axis_tiles(n: usize, cfg: &TileConfig) -> Vec<(usize, usize, usize, usize)> {
    if n <= cfg.patch {
        return vec![(0, n, 0, n)];
    }
    let mut starts = Vec::new();
    let mut p = 0;
    while p + cfg.patch < n {
        starts.push(p);
        p += cfg.stride;
    }
    starts.push(n - cfg.patch);
    starts
        .into_iter()
        .map(|s| {
            let c0 = if s == 0 { 0 } else { s + cfg.border };
            let c1 = if s + cfg.patch == n { n } else { s + cfg.patch - cfg.border };
            (s, cfg.patch, c0, c1)
        })
        .collect()
}

/// Tiles in row-major order of their origins.
pub fn tile_layout(geom: &Geometry, cfg: &TileConfig) -> Result<Vec<Tile>> {
    cfg.validate()?;
    let rows = axis_tiles(geom.height, cfg);
    let cols = axis_tiles(geom.width, cfg);
    let mut out = Vec::with_capacity(rows.len() * cols.len());
    for &(r, h, r0, r1) in &rows {
        for &(c, w, c0, c1) in &cols {
            out.push(Tile { row: r, col: c, height: h, width: w, core_row0: r0, core_row1: r1, core_col0: c0, core_col1: c1 });
        }
    }
    Ok(out)
}

/// Solves every tile with `solve` (in parallel) and averages the tile cores
/// into one canvas. Accumulation follows the order of `tiles`. Returns the
/// averaged field and the per-cell core count.
pub fn solve_tiled_with<F>(geom: &Geometry, tiles: &[Tile], solve: F) -> Result<(RasterGrid, Vec<u32>)>
where
    F: Fn(&Tile) -> Result<RasterGrid> + Sync,
{
    let results: Vec<Result<RasterGrid>> = tiles.par_iter().map(&solve).collect();
    let mut sum = vec![0.0; geom.len()];
    let mut count = vec![0u32; geom.len()];
    for (t, res) in tiles.iter().zip(results) {
        let out = res?;
        if out.height() != t.height || out.width() != t.width {
            return Err(dim("tile solver returned a field of the wrong shape"));
        }
        for r in t.core_row0..t.core_row1 {
            for c in t.core_col0..t.core_col1 {
                let i = geom.idx(r, c);
                sum[i] += out.get(r - t.row, c - t.col);
                count[i] += 1;
            }
        }
    }
    if let Some(i) = count.iter().position(|&c| c == 0) {
        return Err(dim(format!("tiling left cell {} uncovered", i)));
    }
    let vals = sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect();
    Ok((RasterGrid::new(*geom, vals)?, count))
}

/// Tiled variational solve: each tile sees its own window of the scene and
/// observations and is optimised independently.
pub fn solve_tiled(problem: &Problem, settings: &SolveSettings, tiles: &TileConfig) -> Result<ReconState> {
    let geom = *problem.geometry();
    let layout = tile_layout(&geom, tiles)?;
    let (r_hat, _) = solve_tiled_with(&geom, &layout, |t| {
        let sub = problem.crop(t.row, t.col, t.height, t.width)?;
        Ok(solve_variational(&sub, settings)?.0.r_hat)
    })?;
    Ok(ReconState { r_hat, norm: problem.norm })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cores_cover_a_600_grid() {
        let g = Geometry::unit(600, 600).unwrap();
        let tiles = tile_layout(&g, &TileConfig::default()).unwrap();
        let (_, count) = solve_tiled_with(&g, &tiles, |t| Ok(RasterGrid::zeros(Geometry::unit(t.height, t.width)?))).unwrap();
        assert!(count.iter().all(|&c| c >= 1));
        let starts: Vec<usize> = tiles.iter().filter(|t| t.row == 0).map(|t| t.col).collect();
        assert_eq!(starts, vec![0, 64, 128, 192, 256, 320, 344]);
    }

    #[test]
    fn disjoint_cores_copy_tile_values() {
        let g = Geometry::unit(40, 40).unwrap();
        let cfg = TileConfig { patch: 20, stride: 10, border: 5 };
        let tiles = tile_layout(&g, &cfg).unwrap();
        // Each tile reports its global coordinates, so any averaging of
        // disagreeing tiles would show up.
        let (out, count) = solve_tiled_with(&g, &tiles, |t| {
            Ok(RasterGrid::from_index_fn(Geometry::unit(t.height, t.width)?, |r, c| {
                ((r + t.row) * 1000 + c + t.col) as f64
            }))
        })
        .unwrap();
        assert!(count.iter().all(|&c| c == 1));
        for r in 0..40 {
            for c in 0..40 {
                assert_eq!(out.get(r, c), (r * 1000 + c) as f64);
            }
        }
    }

    #[test]
    fn accumulation_is_order_independent() {
        let g = Geometry::unit(50, 50).unwrap();
        let cfg = TileConfig { patch: 24, stride: 6, border: 6 };
        let tiles = tile_layout(&g, &cfg).unwrap();
        let stub = |t: &Tile| {
            Ok(RasterGrid::from_index_fn(Geometry::unit(t.height, t.width)?, |r, c| {
                ((r * 7 + c * 13 + t.row * 3 + t.col) as f64).sin()
            }))
        };
        let (a, _) = solve_tiled_with(&g, &tiles, stub).unwrap();
        let mut rev = tiles.clone();
        rev.reverse();
        let mut sorted = rev.clone();
        sorted.sort_by_key(|t| (t.row, t.col));
        let (b, _) = solve_tiled_with(&g, &sorted, stub).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn small_grids_use_one_tile() {
        let g = Geometry::unit(100, 300).unwrap();
        let tiles = tile_layout(&g, &TileConfig::default()).unwrap();
        assert!(tiles.iter().all(|t| t.row == 0 && t.height == 100 && t.core_row0 == 0 && t.core_row1 == 100));
        assert_eq!(tiles.len(), 2);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(TileConfig { patch: 100, stride: 10, border: 50 }.validate().is_err());
        assert!(TileConfig { patch: 256, stride: 65, border: 96 }.validate().is_err());
    }
}
