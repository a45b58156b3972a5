use serde::{Deserialize, Serialize};

use super::{RadarPicks, Scene};
use crate::error::{dim, param, Error, Result};
use crate::grid::{distance_transform, DihedralElement, Geometry, Mask, RasterGrid};

/// Lower bound on the residual scale, in metres.
pub const SIGMA_FLOOR: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObsConfig {
    /// Cells each pick is spread over.
    pub neighbors: usize,
    /// Gaussian splat radius in cells.
    pub radius_px: f64,
    /// Confidence decay length in cells.
    pub tau_px: f64,
}

impl Default for ObsConfig {
    fn default() -> Self {
        Self { neighbors: 9, radius_px: 2.5, tau_px: 12.0 }
    }
}

/// Spreads each pick over its `k` nearest cell centres with weights
/// `exp(-(d/r)^2)`, `r = radius_px * spacing`, and returns per-cell weighted
/// means together with the mask of touched cells. Untouched cells hold 0.
pub fn splat_picks(picks: &RadarPicks, geom: &Geometry, k: usize, radius_px: f64) -> Result<(RasterGrid, Mask)> {
    if picks.is_empty() {
        return Err(Error::EmptyObservations("no radar picks to splat".into()));
    }
    if k == 0 || !(radius_px > 0.0) {
        return Err(param(format!("splat needs k >= 1 and radius > 0, got k={k}, r={radius_px}")));
    }
    if k > geom.len() {
        return Err(param(format!("splat k={k} exceeds the {} grid cells", geom.len())));
    }
    let r = radius_px * geom.spacing;
    let mut num = vec![0.0; geom.len()];
    let mut den = vec![0.0; geom.len()];
    let mut cand: Vec<(f64, usize)> = Vec::new();
    for p in picks.canonical() {
        let (pr, pc) = geom.cell_of(p.x, p.y).ok_or_else(|| dim("pick outside grid extent"))?;
        // Grow the search window until the k-th candidate is provably among
        // the k nearest: every cell within `half * spacing` lies in the window.
        let mut half = (k as f64).sqrt().ceil() as usize;
        loop {
            cand.clear();
            let (r0, r1) = (pr.saturating_sub(half), (pr + half).min(geom.height - 1));
            let (c0, c1) = (pc.saturating_sub(half), (pc + half).min(geom.width - 1));
            for row in r0..=r1 {
                for col in c0..=c1 {
                    let (cx, cy) = geom.cell_center(row, col);
                    let d2 = (cx - p.x).powi(2) + (cy - p.y).powi(2);
                    cand.push((d2, geom.idx(row, col)));
                }
            }
            let covers_grid = r0 == 0 && c0 == 0 && r1 == geom.height - 1 && c1 == geom.width - 1;
            if cand.len() >= k {
                cand.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let kth = cand[k - 1].0.sqrt();
                if covers_grid || kth <= half as f64 * geom.spacing {
                    break;
                }
            }
            half *= 2;
        }
        for &(d2, i) in &cand[..k] {
            let w = (-d2 / (r * r)).exp();
            num[i] += w * p.bed;
            den[i] += w;
        }
    }
    let mask = Mask::new(*geom, den.iter().map(|&w| w > 0.0).collect())?;
    let vals = num.iter().zip(&den).map(|(&n, &w)| if w > 0.0 { n / w } else { 0.0 }).collect();
    Ok((RasterGrid::new(*geom, vals)?, mask))
}

/// `exp(-d / tau)` cellwise.
pub fn confidence_map(d_rad: &RasterGrid, tau_px: f64) -> Result<RasterGrid> {
    if !(tau_px > 0.0) {
        return Err(param(format!("confidence tau must be positive, got {tau_px}")));
    }
    Ok(d_rad.map(|d| (-d / tau_px).exp()))
}

/// Radar observations resampled onto a scene grid.
#[derive(Debug, Clone)]
pub struct ObservationLayer {
    /// Cells that received splatted radar data.
    pub mask: Mask,
    /// Radar thickness `s - bed`; zero outside `mask`.
    pub h_rad: RasterGrid,
    /// Distance in cells to the nearest masked cell.
    pub d_rad: RasterGrid,
    pub confidence: RasterGrid,
}

impl ObservationLayer {
    pub fn build(picks: &RadarPicks, scene: &Scene, cfg: &ObsConfig) -> Result<Self> {
        let (bed, splat_mask) = splat_picks(picks, scene.geometry(), cfg.neighbors, cfg.radius_px)?;
        let mask = splat_mask.and(scene.valid())?;
        if !mask.any() {
            return Err(Error::EmptyObservations("no radar data on valid cells".into()));
        }
        let s = scene.surface().values();
        let h_rad = RasterGrid::new(
            *scene.geometry(),
            bed.values()
                .iter()
                .enumerate()
                .map(|(i, &b)| if mask.cells()[i] { s[i] - b } else { 0.0 })
                .collect(),
        )?;
        let d_rad = distance_transform(&mask)?;
        let confidence = confidence_map(&d_rad, cfg.tau_px)?;
        Ok(Self { mask, h_rad, d_rad, confidence })
    }

    pub fn geometry(&self) -> &Geometry {
        self.mask.geometry()
    }

    /// Window of the layer. Distances and confidence are kept from the full
    /// grid so picks just outside the window still count.
    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Result<Self> {
        Ok(Self {
            mask: self.mask.crop(row, col, height, width)?,
            h_rad: self.h_rad.crop(row, col, height, width)?,
            d_rad: self.d_rad.crop(row, col, height, width)?,
            confidence: self.confidence.crop(row, col, height, width)?,
        })
    }

    pub fn transform(&self, g: DihedralElement) -> Result<Self> {
        Ok(Self {
            mask: g.apply_mask(&self.mask)?,
            h_rad: g.apply_grid(&self.h_rad)?,
            d_rad: g.apply_grid(&self.d_rad)?,
            confidence: g.apply_grid(&self.confidence)?,
        })
    }

    /// Same layer with the measurement mask restricted to `keep`. Distances
    /// and confidence are recomputed from the reduced mask.
    pub fn restricted(&self, keep: &Mask, tau_px: f64) -> Result<Self> {
        let mask = self.mask.and(keep)?;
        if !mask.any() {
            return Err(Error::EmptyObservations("no radar cells left after restriction".into()));
        }
        let h_rad = RasterGrid::new(
            *self.geometry(),
            self.h_rad.values().iter().zip(mask.cells()).map(|(&h, &m)| if m { h } else { 0.0 }).collect(),
        )?;
        let d_rad = distance_transform(&mask)?;
        let confidence = confidence_map(&d_rad, tau_px)?;
        Ok(Self { mask, h_rad, d_rad, confidence })
    }
}

/// Robust centre and scale used to normalise the residual field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mu_t: f64,
    pub sigma_t: f64,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median and `1.4826 * MAD` of the radar residuals `h_rad - h_p` over
/// observed cells inside `region`. The scale never drops below `floor`.
pub fn residual_norm_stats(obs: &ObservationLayer, scene: &Scene, region: &Mask, floor: f64) -> Result<NormStats> {
    if !(floor > 0.0) {
        return Err(param("sigma floor must be positive"));
    }
    let sel = obs.mask.and(region)?.and(scene.valid())?;
    let hp = scene.prior_thickness().values();
    let mut res: Vec<f64> = sel.indices().map(|i| obs.h_rad.values()[i] - hp[i]).collect();
    stats_from_residuals(&mut res, floor)
}

pub(crate) fn stats_from_residuals(res: &mut [f64], floor: f64) -> Result<NormStats> {
    if res.is_empty() {
        return Err(Error::EmptyObservations("no radar residuals inside the region".into()));
    }
    let mu_t = median(res);
    let mut dev: Vec<f64> = res.iter().map(|r| (r - mu_t).abs()).collect();
    let sigma_t = (1.4826 * median(&mut dev)).max(floor);
    Ok(NormStats { mu_t, sigma_t })
}
