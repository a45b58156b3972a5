//! Scene assembly, radar ingestion, synthetic scenes and file formats.

mod features;
pub mod io;
mod observe;
mod picks;
mod synth;

pub use features::{build_feature_stack, ChannelNorm, FeatureStack, CHANNEL_NAMES};
pub use observe::{
    confidence_map, residual_norm_stats, splat_picks, NormStats, ObsConfig, ObservationLayer,
    SIGMA_FLOOR,
};
pub use picks::{Pick, PickIngest, RadarPicks};
pub use synth::{synth_scene, LineOrientation, PickPattern, SynthParams, SynthScene};

use std::collections::VecDeque;

use crate::error::{dim, Result};
use crate::grid::{DihedralElement, Geometry, Mask, RasterGrid, VectorField};

/// Geophysical inputs on one grid.
///
/// The prior thickness is always derived as `surface - prior_bed`; there is no
/// way to set it independently.
#[derive(Debug, Clone)]
pub struct Scene {
    surface: RasterGrid,
    velocity: VectorField,
    smb: RasterGrid,
    dhdt: RasterGrid,
    prior_bed: RasterGrid,
    prior_thickness: RasterGrid,
    valid: Mask,
}

impl Scene {
    /// Assembles a scene. Cells that are nodata in any input are marked invalid
    /// and gap-filled from the nearest valid cell so stencils stay finite.
    pub fn new(
        surface: RasterGrid,
        velocity: VectorField,
        smb: RasterGrid,
        dhdt: RasterGrid,
        prior_bed: RasterGrid,
    ) -> Result<Self> {
        let geom = *surface.geometry();
        for (name, g) in [
            ("velocity", velocity.geometry()),
            ("smb", smb.geometry()),
            ("dhdt", dhdt.geometry()),
            ("prior bed", prior_bed.geometry()),
        ] {
            if !g.same_shape(&geom) {
                return Err(dim(format!(
                    "{name} is {}x{}, surface is {}x{}",
                    g.height, g.width, geom.height, geom.width
                )));
            }
        }
        let mut valid = surface.valid_mask();
        for m in [
            velocity.x.valid_mask(),
            velocity.y.valid_mask(),
            smb.valid_mask(),
            dhdt.valid_mask(),
            prior_bed.valid_mask(),
        ] {
            valid = valid.and(&m)?;
        }
        if !valid.any() {
            return Err(dim("scene has no valid cells"));
        }
        let fill = |g: RasterGrid| fill_invalid(&g.with_nodata(None), &valid);
        let surface = fill(surface);
        let velocity = VectorField::new(fill(velocity.x), fill(velocity.y))?;
        let smb = fill(smb);
        let dhdt = fill(dhdt);
        let prior_bed = fill(prior_bed);
        let prior_thickness = surface.zip_map(&prior_bed, |s, b| s - b)?;
        Ok(Self { surface, velocity, smb, dhdt, prior_bed, prior_thickness, valid })
    }

    pub fn geometry(&self) -> &Geometry {
        self.surface.geometry()
    }

    pub fn surface(&self) -> &RasterGrid {
        &self.surface
    }

    pub fn velocity(&self) -> &VectorField {
        &self.velocity
    }

    pub fn smb(&self) -> &RasterGrid {
        &self.smb
    }

    pub fn dhdt(&self) -> &RasterGrid {
        &self.dhdt
    }

    pub fn prior_bed(&self) -> &RasterGrid {
        &self.prior_bed
    }

    pub fn prior_thickness(&self) -> &RasterGrid {
        &self.prior_thickness
    }

    pub fn valid(&self) -> &Mask {
        &self.valid
    }

    /// Replaces the prior bed and re-derives the prior thickness.
    pub fn with_prior_bed(&self, prior_bed: RasterGrid) -> Result<Self> {
        Self::new(
            self.surface.clone(),
            self.velocity.clone(),
            self.smb.clone(),
            self.dhdt.clone(),
            prior_bed,
        )
        .and_then(|s| s.with_valid(self.valid.clone()))
    }

    fn with_valid(mut self, valid: Mask) -> Result<Self> {
        self.valid = self.valid.and(&valid)?;
        Ok(self)
    }

    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Result<Self> {
        let surface = self.surface.crop(row, col, height, width)?;
        let prior_bed = self.prior_bed.crop(row, col, height, width)?;
        let prior_thickness = surface.zip_map(&prior_bed, |s, b| s - b)?;
        Ok(Self {
            surface,
            velocity: self.velocity.crop(row, col, height, width)?,
            smb: self.smb.crop(row, col, height, width)?,
            dhdt: self.dhdt.crop(row, col, height, width)?,
            prior_bed,
            prior_thickness,
            valid: self.valid.crop(row, col, height, width)?,
        })
    }

    /// Rotates/reflects every field; velocity is mixed as a vector.
    pub fn transform(&self, g: DihedralElement) -> Result<Self> {
        let (vx, vy) = g.apply_pair(&self.velocity.x, &self.velocity.y)?;
        let surface = g.apply_grid(&self.surface)?;
        let prior_bed = g.apply_grid(&self.prior_bed)?;
        let prior_thickness = surface.zip_map(&prior_bed, |s, b| s - b)?;
        Ok(Self {
            surface,
            velocity: VectorField::new(vx, vy)?,
            smb: g.apply_grid(&self.smb)?,
            dhdt: g.apply_grid(&self.dhdt)?,
            prior_bed,
            prior_thickness,
            valid: g.apply_mask(&self.valid)?,
        })
    }
}

/// Copies each invalid cell from its nearest valid cell (4-connected
/// breadth-first order, ties resolved by visiting order).
fn fill_invalid(f: &RasterGrid, valid: &Mask) -> RasterGrid {
    let g = *f.geometry();
    let mut out = f.clone();
    if valid.count() == g.len() {
        return out;
    }
    let mut seen: Vec<bool> = valid.cells().to_vec();
    let mut queue: VecDeque<usize> = valid.indices().collect();
    while let Some(i) = queue.pop_front() {
        let (r, c) = (i / g.width, i % g.width);
        let v = out.values()[i];
        let mut visit = |j: usize| {
            if !seen[j] {
                seen[j] = true;
                out.values_mut()[j] = v;
                queue.push_back(j);
            }
        };
        if r > 0 {
            visit(i - g.width);
        }
        if r + 1 < g.height {
            visit(i + g.width);
        }
        if c > 0 {
            visit(i - 1);
        }
        if c + 1 < g.width {
            visit(i + 1);
        }
    }
    out
}
