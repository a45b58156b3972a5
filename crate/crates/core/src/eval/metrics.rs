use serde::{Deserialize, Serialize};

use crate::data::RadarPicks;
use crate::error::{dim, param, Error, Result};
use crate::grid::{DihedralElement, Mask, RasterGrid};

fn check(pred: &RasterGrid, reference: &RasterGrid, core: &Mask) -> Result<Vec<usize>> {
    pred.check_same_shape(reference)?;
    if !core.geometry().same_shape(pred.geometry()) {
        return Err(dim("core mask and fields differ in shape"));
    }
    let cells: Vec<usize> = core.indices().collect();
    if cells.is_empty() {
        return Err(Error::InsufficientData("evaluation core is empty".into()));
    }
    Ok(cells)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelMetrics {
    pub mae: f64,
    pub rmse: f64,
    /// `None` when the reference is constant over the core.
    pub r2: Option<f64>,
    pub count: usize,
}

fn metrics_from_pairs(pairs: impl Iterator<Item = (f64, f64)> + Clone) -> PixelMetrics {
    let (mut n, mut abs, mut sq, mut mean) = (0usize, 0.0, 0.0, 0.0);
    for (p, r) in pairs.clone() {
        n += 1;
        abs += (p - r).abs();
        sq += (p - r) * (p - r);
        mean += r;
    }
    let nf = n as f64;
    mean /= nf;
    let ss_tot: f64 = pairs.map(|(_, r)| (r - mean) * (r - mean)).sum();
    PixelMetrics {
        mae: abs / nf,
        rmse: (sq / nf).sqrt(),
        r2: (ss_tot > 0.0).then(|| 1.0 - sq / ss_tot),
        count: n,
    }
}

/// MAE, RMSE and R² over the core cells.
pub fn pixel_metrics(pred: &RasterGrid, reference: &RasterGrid, core: &Mask) -> Result<PixelMetrics> {
    let cells = check(pred, reference, core)?;
    let (p, r) = (pred.values(), reference.values());
    Ok(metrics_from_pairs(cells.iter().map(|&i| (p[i], r[i]))))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub element: DihedralElement,
    pub rmse: f64,
}

/// Tries every rotation/reflection of `pred` (only axis-preserving ones on a
/// non-square grid) and keeps the one with the lowest core RMSE. Ties keep
/// the earlier element, identity first.
pub fn align_orientation(pred: &RasterGrid, reference: &RasterGrid, core: &Mask) -> Result<(Alignment, RasterGrid)> {
    check(pred, reference, core)?;
    let square = pred.height() == pred.width();
    let mut best: Option<(Alignment, RasterGrid)> = None;
    for g in DihedralElement::all() {
        if g.transposes() && !square {
            continue;
        }
        let cand = g.apply_grid(pred)?;
        let rmse = pixel_metrics(&cand, reference, core)?.rmse;
        if best.as_ref().is_none_or(|(b, _)| rmse < b.rmse) {
            best = Some((Alignment { element: g, rmse }, cand));
        }
    }
    Ok(best.expect("identity is always tried"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self { window: 7, sigma: 1.5, k1: 0.01, k2: 0.03 }
    }
}

fn dynamic_range(reference: &RasterGrid, cells: &[usize]) -> f64 {
    let v = reference.values();
    let (lo, hi) = cells.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(v[i]), hi.max(v[i])));
    hi - lo
}

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let mut w = Vec::with_capacity(size * size);
    for r in 0..size {
        for k in 0..size {
            let (dr, dk) = (r as f64 - c, k as f64 - c);
            w.push((-(dr * dr + dk * dk) / (2.0 * sigma * sigma)).exp());
        }
    }
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

/// Mean local SSIM over Gaussian windows lying entirely inside the core,
/// with the dynamic range taken from the reference. Negative means are
/// reported as 0.
pub fn ssim_with(pred: &RasterGrid, reference: &RasterGrid, core: &Mask, p: &SsimParams) -> Result<f64> {
    let cells = check(pred, reference, core)?;
    let range = dynamic_range(reference, &cells);
    if !(range > 0.0) {
        return Err(param("SSIM is undefined for a constant reference"));
    }
    let (c1, c2) = ((p.k1 * range).powi(2), (p.k2 * range).powi(2));
    let w = gaussian_window(p.window, p.sigma);
    let (h, wd, n) = (pred.height(), pred.width(), p.window);
    let (x, y) = (pred.values(), reference.values());
    let mut total = 0.0;
    let mut windows = 0usize;
    for r0 in 0..=h.saturating_sub(n) {
        'win: for c0 in 0..=wd.saturating_sub(n) {
            if h < n || wd < n {
                break;
            }
            for dr in 0..n {
                for dc in 0..n {
                    if !core.get(r0 + dr, c0 + dc) {
                        continue 'win;
                    }
                }
            }
            let (mut mx, mut my) = (0.0, 0.0);
            for dr in 0..n {
                for dc in 0..n {
                    let i = (r0 + dr) * wd + c0 + dc;
                    let k = w[dr * n + dc];
                    mx += k * x[i];
                    my += k * y[i];
                }
            }
            let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
            for dr in 0..n {
                for dc in 0..n {
                    let i = (r0 + dr) * wd + c0 + dc;
                    let k = w[dr * n + dc];
                    let (a, b) = (x[i] - mx, y[i] - my);
                    vx += k * a * a;
                    vy += k * b * b;
                    cxy += k * a * b;
                }
            }
            total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            windows += 1;
        }
    }
    if windows == 0 {
        return Err(Error::InsufficientData(format!("no {n}x{n} window fits inside the core")));
    }
    Ok((total / windows as f64).max(0.0))
}

pub fn ssim(pred: &RasterGrid, reference: &RasterGrid, core: &Mask) -> Result<f64> {
    ssim_with(pred, reference, core, &SsimParams::default())
}

/// `10 log10(R² / MSE)` with `R` the reference's dynamic range over the core.
/// Identical fields give `+inf`.
pub fn psnr(pred: &RasterGrid, reference: &RasterGrid, core: &Mask) -> Result<f64> {
    let cells = check(pred, reference, core)?;
    let range = dynamic_range(reference, &cells);
    if !(range > 0.0) {
        return Err(param("PSNR is undefined for a constant reference"));
    }
    let (p, r) = (pred.values(), reference.values());
    let mse = cells.iter().map(|&i| (p[i] - r[i]).powi(2)).sum::<f64>() / cells.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (range * range / mse).log10())
}

/// Riley's terrain ruggedness: root of the summed squared differences to the
/// eight neighbours. Edge cells have no full neighbourhood and are NaN.
pub fn tri(field: &RasterGrid) -> RasterGrid {
    let (h, w) = (field.height(), field.width());
    let v = field.values();
    RasterGrid::from_index_fn(*field.geometry(), |r, c| {
        if r == 0 || c == 0 || r + 1 >= h || c + 1 >= w {
            return f64::NAN;
        }
        let z = v[r * w + c];
        let mut s = 0.0;
        for dr in [-1isize, 0, 1] {
            for dc in [-1isize, 0, 1] {
                if dr != 0 || dc != 0 {
                    let n = v[(r as isize + dr) as usize * w + (c as isize + dc) as usize];
                    s += (n - z) * (n - z);
                }
            }
        }
        s.sqrt()
    })
}

/// Mean `|TRI(pred) - TRI(ref)|` over interior core cells.
pub fn tri_diff(pred: &RasterGrid, reference: &RasterGrid, core: &Mask) -> Result<f64> {
    let cells = check(pred, reference, core)?;
    let (tp, tr) = (tri(pred), tri(reference));
    let (a, b) = (tp.values(), tr.values());
    let (mut sum, mut n) = (0.0, 0usize);
    for i in cells {
        if a[i].is_finite() {
            sum += (a[i] - b[i]).abs();
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::InsufficientData("no interior cells in the core".into()));
    }
    Ok(sum / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarErrors {
    /// `None` when no pick falls in the core.
    pub metrics: Option<PixelMetrics>,
    /// Picks outside the core.
    pub excluded: usize,
}

/// Errors of `bed` sampled at the cells of picks inside the core.
pub fn radar_errors(bed: &RasterGrid, picks: &RadarPicks, core: &Mask) -> Result<RadarErrors> {
    if !core.geometry().same_shape(bed.geometry()) {
        return Err(dim("core mask and bed differ in shape"));
    }
    let g = bed.geometry();
    let mut pairs = Vec::new();
    let mut excluded = 0;
    for p in picks.canonical() {
        match g.cell_of(p.x, p.y) {
            Some((r, c)) if core.get(r, c) => pairs.push((bed.get(r, c), p.bed)),
            _ => excluded += 1,
        }
    }
    let metrics = (!pairs.is_empty()).then(|| metrics_from_pairs(pairs.iter().copied()));
    Ok(RadarErrors { metrics, excluded })
}

/// Distance bins in cells: `[0, 2]`, `(2, 6]`, `(6, inf)`.
pub const DISTANCE_BINS: [(f64, f64); 3] = [(0.0, 2.0), (2.0, 6.0), (6.0, f64::INFINITY)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceBin {
    pub lower_px: f64,
    /// `None` for the open last bin.
    pub upper_px: Option<f64>,
    pub count: usize,
    pub sse: f64,
    /// `None` for an empty bin.
    pub rmse: Option<f64>,
}

pub fn distance_bin_of(d: f64) -> usize {
    DISTANCE_BINS.iter().position(|&(_, hi)| d <= hi).unwrap_or(DISTANCE_BINS.len() - 1)
}

/// RMSE over core cells grouped by distance to the nearest pick.
pub fn stratified_rmse(pred: &RasterGrid, reference: &RasterGrid, core: &Mask, d_rad: &RasterGrid) -> Result<Vec<DistanceBin>> {
    let cells = check(pred, reference, core)?;
    d_rad.check_same_shape(pred)?;
    let mut bins: Vec<DistanceBin> = DISTANCE_BINS
        .iter()
        .map(|&(lo, hi)| DistanceBin { lower_px: lo, upper_px: hi.is_finite().then_some(hi), count: 0, sse: 0.0, rmse: None })
        .collect();
    let (p, r, d) = (pred.values(), reference.values(), d_rad.values());
    for i in cells {
        let b = &mut bins[distance_bin_of(d[i])];
        b.count += 1;
        b.sse += (p[i] - r[i]).powi(2);
    }
    for b in &mut bins {
        b.rmse = (b.count > 0).then(|| (b.sse / b.count as f64).sqrt());
    }
    Ok(bins)
}
