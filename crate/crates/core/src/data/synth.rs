//! Synthetic scenes whose true thickness satisfies the discrete continuity
//! equation exactly.
//!
//! The ice flux is linear in space, `F = q0 (1 + ax X/Lx, ay Y/Ly)` with `X, Y`
//! measured from the grid centre, and the surface is `s0 - k phi` where
//! `grad phi = F`, so velocity `v = F / h` points down the surface gradient.
//! `dhdt` is then computed with the crate's own divergence stencil.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Pick, RadarPicks, Scene};
use crate::error::{param, Result};
use crate::grid::{divergence, Geometry, RasterGrid, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineOrientation {
    /// Lines run along y, crossing the mean flow.
    Across,
    /// Lines run along x, parallel to the mean flow.
    Along,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PickPattern {
    /// Evenly spaced flight lines, one pick every `spacing_px` cells.
    Lines { count: usize, orientation: LineOrientation, spacing_px: usize },
    /// One pick every `step` cells in both directions.
    Lattice { step: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub height: usize,
    pub width: usize,
    /// Cell size in metres.
    pub spacing: f64,
    /// Surface elevation at the grid centre (m).
    pub surface_elevation: f64,
    /// Surface slope magnitude at the grid centre.
    pub surface_slope: f64,
    /// Flux magnitude at the grid centre (m^2/yr).
    pub flux: f64,
    /// Relative change of the along-flow flux across half the grid.
    pub flux_stretch_x: f64,
    /// Cross-flow flux at the top/bottom edge relative to `flux`.
    pub flux_stretch_y: f64,
    /// Bed elevation at the grid centre (m).
    pub bed_elevation: f64,
    /// Bed drop from the centre to the downstream edge (m).
    pub bed_ramp: f64,
    pub trough_count: usize,
    /// Maximum trough depth (m); each trough draws a depth in `[0.5, 1]` of it.
    pub trough_depth: f64,
    pub trough_length_px: f64,
    pub trough_width_px: f64,
    /// Smallest admissible true thickness (m).
    pub thickness_min: f64,
    /// Surface mass balance at the centre elevation (m/yr).
    pub smb: f64,
    /// SMB change per metre of elevation (1/yr).
    pub smb_lapse: f64,
    /// Peak absolute prior bed error (m).
    pub bias_amplitude: f64,
    /// Correlation length of the prior error (cells).
    pub bias_length_px: f64,
    /// Along-flow elongation of the prior error.
    pub bias_stretch: f64,
    pub picks: PickPattern,
    /// Standard deviation of pick noise (m).
    pub pick_noise: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            height: 128,
            width: 128,
            spacing: 150.0,
            surface_elevation: 1500.0,
            surface_slope: 0.01,
            flux: 8.0e5,
            flux_stretch_x: 0.3,
            flux_stretch_y: -0.2,
            bed_elevation: 0.0,
            bed_ramp: 100.0,
            trough_count: 4,
            trough_depth: 300.0,
            trough_length_px: 40.0,
            trough_width_px: 8.0,
            thickness_min: 50.0,
            smb: 0.3,
            smb_lapse: 0.002,
            bias_amplitude: 60.0,
            bias_length_px: 20.0,
            bias_stretch: 1.0,
            picks: PickPattern::Lines { count: 6, orientation: LineOrientation::Across, spacing_px: 1 },
            pick_noise: 0.0,
        }
    }
}

/// A generated scene with its ground truth.
#[derive(Debug, Clone)]
pub struct SynthScene {
    /// Inputs with the biased prior bed.
    pub scene: Scene,
    pub true_bed: RasterGrid,
    pub true_thickness: RasterGrid,
    pub picks: RadarPicks,
}

impl SynthParams {
    fn validate(&self) -> Result<()> {
        let positive = [
            ("spacing", self.spacing),
            ("surface_slope", self.surface_slope),
            ("flux", self.flux),
            ("trough_length_px", self.trough_length_px),
            ("trough_width_px", self.trough_width_px),
            ("thickness_min", self.thickness_min),
            ("bias_length_px", self.bias_length_px),
            ("bias_stretch", self.bias_stretch),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(param(format!("{name} must be positive, got {v}")));
            }
        }
        if self.flux_stretch_x.abs() >= 1.0 {
            return Err(param("flux_stretch_x must lie in (-1, 1) so flow never reverses"));
        }
        if self.trough_depth < 0.0 || self.bias_amplitude < 0.0 || self.pick_noise < 0.0 {
            return Err(param("depths, amplitudes and noise must be non-negative"));
        }
        match self.picks {
            PickPattern::Lines { count, spacing_px, .. } if count == 0 || spacing_px == 0 => {
                Err(param("flight lines need count >= 1 and spacing_px >= 1"))
            }
            PickPattern::Lattice { step: 0 } => Err(param("lattice step must be >= 1")),
            _ => Ok(()),
        }
    }
}

/// Generates a deterministic synthetic scene from `seed`.
pub fn synth_scene(seed: u64, p: &SynthParams) -> Result<SynthScene> {
    p.validate()?;
    let geom = Geometry::new(p.height, p.width, p.spacing, (0.0, 0.0))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lx, ly) = (0.5 * p.width as f64 * p.spacing, 0.5 * p.height as f64 * p.spacing);
    let centred = |x: f64, y: f64| (x - lx, y - ly);

    let q0 = p.flux;
    let (ax, ay) = (p.flux_stretch_x, p.flux_stretch_y);
    let kappa = p.surface_slope / q0;
    let surface = RasterGrid::from_fn(geom, |x, y| {
        let (xc, yc) = centred(x, y);
        let phi = q0 * (xc + ax * xc * xc / (2.0 * lx) + ay * yc * yc / (2.0 * ly));
        p.surface_elevation - kappa * phi
    });
    let flux_x = RasterGrid::from_fn(geom, |x, y| q0 * (1.0 + ax * centred(x, y).0 / lx));
    let flux_y = RasterGrid::from_fn(geom, |x, y| q0 * ay * centred(x, y).1 / ly);

    let troughs: Vec<(f64, f64, f64)> = (0..p.trough_count)
        .map(|_| {
            let cx = rng.random_range(0.0..2.0 * lx);
            let cy = rng.random_range(0.0..2.0 * ly);
            let depth = p.trough_depth * rng.random_range(0.5..=1.0);
            (cx, cy, depth)
        })
        .collect();
    let (tl, tw) = (p.trough_length_px * p.spacing, p.trough_width_px * p.spacing);
    let true_bed = RasterGrid::from_fn(geom, |x, y| {
        let mut b = p.bed_elevation - p.bed_ramp * centred(x, y).0 / lx;
        for &(cx, cy, d) in &troughs {
            b -= d * (-((x - cx) / tl).powi(2) - ((y - cy) / tw).powi(2)).exp();
        }
        b
    });

    let true_thickness = surface.zip_map(&true_bed, |s, b| s - b)?;
    let h_min = true_thickness.values().iter().copied().fold(f64::INFINITY, f64::min);
    if h_min < p.thickness_min {
        return Err(param(format!(
            "true thickness reaches {h_min:.1} m, below the {} m minimum",
            p.thickness_min
        )));
    }
    let vx = flux_x.zip_map(&true_thickness, |f, h| f / h)?;
    let vy = flux_y.zip_map(&true_thickness, |f, h| f / h)?;
    let s_mean = p.surface_elevation;
    let smb = surface.map(|s| p.smb + p.smb_lapse * (s - s_mean));
    // Flux recomputed exactly as the mass residual forms it.
    let flux = VectorField::new(
        true_thickness.zip_map(&vx, |h, v| h * v)?,
        true_thickness.zip_map(&vy, |h, v| h * v)?,
    )?;
    let dhdt = smb.zip_map(&divergence(&flux)?, |a, d| a - d)?;

    let bias = smooth_bias(&mut rng, geom, p);
    let prior_bed = true_bed.zip_map(&bias, |b, e| b + e)?;

    let noise = Normal::new(0.0, p.pick_noise.max(f64::MIN_POSITIVE)).map_err(|e| param(e.to_string()))?;
    let mut raw = Vec::new();
    for (row, col) in pick_cells(&geom, &p.picks) {
        let (x, y) = geom.cell_center(row, col);
        let e = if p.pick_noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        raw.push(Pick { x, y, bed: true_bed.get(row, col) + e });
    }
    let picks = RadarPicks::ingest(raw, &geom).picks;

    let velocity = VectorField::new(vx, vy)?;
    let scene = Scene::new(surface, velocity, smb, dhdt, prior_bed)?;
    Ok(SynthScene { scene, true_bed, true_thickness, picks })
}

/// Sum of random Gaussian bumps rescaled to peak `bias_amplitude`.
fn smooth_bias(rng: &mut ChaCha8Rng, geom: Geometry, p: &SynthParams) -> RasterGrid {
    if p.bias_amplitude == 0.0 {
        return RasterGrid::zeros(geom);
    }
    let ly = p.bias_length_px * p.spacing;
    let lx = ly * p.bias_stretch;
    let (w, h) = (geom.width as f64 * p.spacing, geom.height as f64 * p.spacing);
    let area = (w + 4.0 * lx) * (h + 4.0 * ly);
    let n = ((2.0 * area / (lx * ly)).ceil() as usize).max(4);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let bumps: Vec<(f64, f64, f64)> = (0..n)
        .map(|_| {
            let cx = rng.random_range(-2.0 * lx..w + 2.0 * lx);
            let cy = rng.random_range(-2.0 * ly..h + 2.0 * ly);
            (cx, cy, unit.sample(rng))
        })
        .collect();
    let raw = RasterGrid::from_fn(geom, |x, y| {
        bumps
            .iter()
            .map(|&(cx, cy, a)| a * (-0.5 * (((x - cx) / lx).powi(2) + ((y - cy) / ly).powi(2))).exp())
            .sum()
    });
    let peak = raw.max_abs();
    if peak == 0.0 {
        return raw;
    }
    raw.map(|v| v * p.bias_amplitude / peak)
}

fn pick_cells(geom: &Geometry, pattern: &PickPattern) -> Vec<(usize, usize)> {
    let (h, w) = (geom.height, geom.width);
    match *pattern {
        PickPattern::Lines { count, orientation, spacing_px } => {
            let across = orientation == LineOrientation::Across;
            let (n_lines_axis, n_along) = if across { (w, h) } else { (h, w) };
            let mut out = Vec::new();
            let mut last = None;
            for i in 0..count {
                let line = (((i as f64 + 0.5) * n_lines_axis as f64 / count as f64) as usize).min(n_lines_axis - 1);
                if last == Some(line) {
                    continue;
                }
                last = Some(line);
                for j in (0..n_along).step_by(spacing_px) {
                    out.push(if across { (j, line) } else { (line, j) });
                }
            }
            out
        }
        PickPattern::Lattice { step } => {
            let off = step / 2;
            (off..h)
                .step_by(step)
                .flat_map(|r| (off..w).step_by(step).map(move |c| (r, c)))
                .collect()
        }
    }
}
