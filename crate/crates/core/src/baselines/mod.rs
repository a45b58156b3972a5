//! Classical interpolators: inverse-distance weighting and residual kriging
//! over the prior bed.

mod idw;
mod kriging;
mod variogram;

pub use idw::idw_interpolate;
pub use kriging::{krige_residual, kriging_weights, pick_residuals, KrigingMode, KrigingOutput};
pub use variogram::{
    empirical_variogram, fit_exponential_variogram, fit_from, wls_loss, VariogramBin, VariogramFit, VariogramModel,
};

use serde::{Deserialize, Serialize};

use crate::data::{RadarPicks, Scene};
use crate::error::{param, Result};
use crate::grid::{Mask, RasterGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub idw_neighbors: usize,
    pub idw_power: f64,
    pub krige_neighbors: usize,
    pub krige_mode: KrigingMode,
    pub variogram_bins: usize,
    /// Largest lag in map units; defaults to half the diagonal of the
    /// fitting region's bounding box.
    pub max_lag: Option<f64>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            idw_neighbors: 12,
            idw_power: 2.0,
            krige_neighbors: 16,
            krige_mode: KrigingMode::Ordinary,
            variogram_bins: 15,
            max_lag: None,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.idw_neighbors == 0 || self.krige_neighbors == 0 {
            return Err(param("baseline neighbour counts must be at least 1"));
        }
        if !(self.idw_power > 0.0) {
            return Err(param("IDW power must be positive"));
        }
        if self.variogram_bins < 3 {
            return Err(param("variogram needs at least 3 bins"));
        }
        if let Some(l) = self.max_lag {
            if !(l > 0.0) {
                return Err(param("max lag must be positive"));
            }
        }
        Ok(())
    }
}

/// Half the diagonal of the bounding box of `region`, in map units.
pub fn half_diagonal(region: &Mask) -> f64 {
    let g = region.geometry();
    let (mut r0, mut r1, mut c0, mut c1) = (usize::MAX, 0, usize::MAX, 0);
    for i in region.indices() {
        let (r, c) = (i / g.width, i % g.width);
        r0 = r0.min(r);
        r1 = r1.max(r);
        c0 = c0.min(c);
        c1 = c1.max(c);
    }
    if r0 == usize::MAX {
        return 0.0;
    }
    0.5 * g.spacing * (((r1 - r0 + 1) as f64).hypot((c1 - c0 + 1) as f64))
}

#[derive(Debug, Clone)]
pub struct KrigingRun {
    pub bed: RasterGrid,
    pub fit: VariogramFit,
    pub bins: Vec<VariogramBin>,
    pub fallback_cells: usize,
}

/// Fits the variogram on residuals of `picks` inside `fit_region` and kriges
/// with those picks.
pub fn run_kriging(picks: &RadarPicks, scene: &Scene, fit_region: &Mask, cfg: &BaselineConfig) -> Result<KrigingRun> {
    cfg.validate()?;
    let used = picks.within(fit_region);
    let resid = pick_residuals(&used, scene);
    let max_lag = cfg.max_lag.unwrap_or_else(|| half_diagonal(fit_region));
    let bins = empirical_variogram(&resid.canonical(), cfg.variogram_bins, max_lag)?;
    let fit = fit_exponential_variogram(&bins)?;
    log::info!(
        "variogram nugget={:.4} sill={:.4} range={:.4}{}",
        fit.model.nugget,
        fit.model.sill,
        fit.model.range,
        if fit.degenerate { " (degenerate)" } else { "" }
    );
    let out = krige_residual(&used, scene, &fit.model, cfg.krige_neighbors, cfg.krige_mode, (cfg.idw_neighbors, cfg.idw_power))?;
    Ok(KrigingRun { bed: out.bed, fit, bins, fallback_cells: out.fallback_cells })
}

/// IDW over the picks inside `region`.
pub fn run_idw(picks: &RadarPicks, scene: &Scene, region: &Mask, cfg: &BaselineConfig) -> Result<RasterGrid> {
    cfg.validate()?;
    idw_interpolate(&picks.within(region), scene.geometry(), cfg.idw_neighbors, cfg.idw_power)
}
