use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::idw::{idw_at, PickIndex};
use super::variogram::VariogramModel;
use crate::data::{Pick, RadarPicks, Scene};
use crate::error::{param, Result};
use crate::grid::RasterGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KrigingMode {
    /// Known zero mean.
    Simple,
    /// Unknown local mean; weights sum to one.
    Ordinary,
}

/// Kriging weights for `query` from the neighbours `nbrs`. The system is
/// retried once with `1e-8 * (sill + nugget)` on the diagonal; `None` means it
/// stayed singular.
pub fn kriging_weights(model: &VariogramModel, nbrs: &[(f64, f64)], query: (f64, f64), mode: KrigingMode) -> Option<Vec<f64>> {
    let n = nbrs.len();
    if n == 0 {
        return None;
    }
    let dist = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).hypot(a.1 - b.1);
    let jitter = 1e-8 * (model.sill + model.nugget);
    let finite = |w: &DVector<f64>| w.iter().all(|x| x.is_finite());
    for extra in [0.0, jitter] {
        let w = match mode {
            KrigingMode::Simple => {
                let k = DMatrix::from_fn(n, n, |i, j| model.covariance(dist(nbrs[i], nbrs[j])) + if i == j { extra } else { 0.0 });
                let c = DVector::from_fn(n, |i, _| model.covariance(dist(nbrs[i], query)));
                k.cholesky().map(|ch| ch.solve(&c))
            }
            KrigingMode::Ordinary => {
                let k = DMatrix::from_fn(n + 1, n + 1, |i, j| match (i < n, j < n) {
                    (true, true) => model.covariance(dist(nbrs[i], nbrs[j])) + if i == j { extra } else { 0.0 },
                    (false, false) => 0.0,
                    _ => 1.0,
                });
                let c = DVector::from_fn(n + 1, |i, _| if i < n { model.covariance(dist(nbrs[i], query)) } else { 1.0 });
                k.lu().solve(&c).map(|s| s.rows(0, n).into_owned())
            }
        };
        if let Some(w) = w.filter(finite) {
            return Some(w.iter().copied().collect());
        }
    }
    None
}

/// Picks with `bed` replaced by the residual against the prior bed in the
/// pick's cell.
pub fn pick_residuals(picks: &RadarPicks, scene: &Scene) -> RadarPicks {
    let g = scene.geometry();
    let raw = picks.records().iter().filter_map(|p| {
        let (r, c) = g.cell_of(p.x, p.y)?;
        Some(Pick { bed: p.bed - scene.prior_bed().get(r, c), ..*p })
    });
    RadarPicks::ingest(raw, g).picks
}

#[derive(Debug, Clone)]
pub struct KrigingOutput {
    pub bed: RasterGrid,
    /// Cells whose system stayed singular and were filled by IDW.
    pub fallback_cells: usize,
}

/// Kriges pick residuals over the scene and adds the prior bed back.
/// `idw` gives the neighbour count and power used for singular cells.
pub fn krige_residual(
    picks: &RadarPicks,
    scene: &Scene,
    model: &VariogramModel,
    k: usize,
    mode: KrigingMode,
    idw: (usize, f64),
) -> Result<KrigingOutput> {
    if k == 0 {
        return Err(param("kriging needs k >= 1"));
    }
    let geom = *scene.geometry();
    let index = PickIndex::new(&pick_residuals(picks, scene))?;
    let rows: Vec<(Vec<f64>, usize)> = (0..geom.height)
        .into_par_iter()
        .map(|r| {
            let mut fallback = 0;
            let vals = (0..geom.width)
                .map(|c| {
                    let (x, y) = geom.cell_center(r, c);
                    let nn = index.nearest(x, y, k);
                    let nbrs: Vec<(f64, f64)> = nn.iter().map(|&(_, i)| (index.picks[i].x, index.picks[i].y)).collect();
                    let resid = match kriging_weights(model, &nbrs, (x, y), mode) {
                        Some(w) => w.iter().zip(&nn).map(|(w, &(_, i))| w * index.picks[i].bed).sum(),
                        None => {
                            fallback += 1;
                            idw_at(&index, x, y, idw.0, idw.1, 0.5 * geom.spacing)
                        }
                    };
                    scene.prior_bed().get(r, c) + resid
                })
                .collect();
            (vals, fallback)
        })
        .collect();
    let fallback_cells = rows.iter().map(|r| r.1).sum();
    if fallback_cells > 0 {
        log::warn!("kriging fell back to IDW at {fallback_cells} cells");
    }
    let vals = rows.into_iter().flat_map(|r| r.0).collect();
    Ok(KrigingOutput { bed: RasterGrid::new(geom, vals)?, fallback_cells })
}
