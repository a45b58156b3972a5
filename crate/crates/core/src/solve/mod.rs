//! Direct minimisation of the objective over the residual grid, with
//! tiling and dihedral averaging on top.

mod optim;
mod tiled;
mod tta;
mod variational;

pub use optim::{ema_update, Adam, CosineRestarts};
pub use tiled::{solve_tiled, solve_tiled_with, tile_layout, Tile, TileConfig};
pub use tta::{tta_solve, tta_with};
pub use variational::{solve_variational, History, HistoryRow, SolveSettings, SolverConfig};

use crate::data::{NormStats, ObservationLayer, Scene};
use crate::error::{dim, Result};
use crate::grid::{DihedralElement, Geometry, Mask, RasterGrid};

/// Normalised residual plus the statistics that undo the normalisation.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconState {
    pub r_hat: RasterGrid,
    pub norm: NormStats,
}

impl ReconState {
    pub fn zeros(geom: Geometry, norm: NormStats) -> Self {
        Self { r_hat: RasterGrid::zeros(geom), norm }
    }

    /// `sigma_t * r_hat + mu_t`.
    pub fn residual(&self) -> RasterGrid {
        let NormStats { mu_t, sigma_t } = self.norm;
        self.r_hat.map(|x| sigma_t * x + mu_t)
    }
}

/// Thickness `h_p + r` and bed `s - h` for a state on `scene`.
pub fn reconstruct(state: &ReconState, scene: &Scene) -> Result<(RasterGrid, RasterGrid)> {
    if !state.r_hat.geometry().same_shape(scene.geometry()) {
        return Err(dim("state and scene differ in shape"));
    }
    let h = scene.prior_thickness().zip_map(&state.residual(), |hp, r| hp + r)?;
    let b = scene.surface().zip_map(&h, |s, h| s - h)?;
    Ok((h, b))
}

/// Everything a single solve needs besides the configuration.
#[derive(Debug, Clone)]
pub struct Problem {
    pub scene: Scene,
    pub obs: ObservationLayer,
    pub norm: NormStats,
    /// Cells the solver may change; the rest keep `r_hat = 0`.
    pub region: Mask,
    /// Radar cells whose fit drives early stopping.
    pub monitor: Mask,
}

impl Problem {
    pub fn geometry(&self) -> &Geometry {
        self.scene.geometry()
    }

    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Result<Self> {
        Ok(Self {
            scene: self.scene.crop(row, col, height, width)?,
            obs: self.obs.crop(row, col, height, width)?,
            norm: self.norm,
            region: self.region.crop(row, col, height, width)?,
            monitor: self.monitor.crop(row, col, height, width)?,
        })
    }

    pub fn transform(&self, g: DihedralElement) -> Result<Self> {
        Ok(Self {
            scene: self.scene.transform(g)?,
            obs: self.obs.transform(g)?,
            norm: self.norm,
            region: g.apply_mask(&self.region)?,
            monitor: g.apply_mask(&self.monitor)?,
        })
    }
}
