//! Term kernels on raw buffers plus grid-level wrappers.
//!
//! Every kernel returns the term value and, when given a gradient buffer,
//! adds `coef * d(term)/d(h)` to it, where `h` is the field the term reads.

use super::{huber, smooth_abs, SmoothKernel};
use crate::data::{ObservationLayer, Scene};
use crate::error::{dim, Error, Result};
use crate::grid::stencil::{
    diff_x, diff_x_adjoint, diff_y, diff_y_adjoint, gaussian_kernel, laplacian_adjoint, laplacian_into,
    pool_adjoint, pool_into, pooled_dims, smooth_adjoint, smooth_into,
};
use crate::grid::{gradient, Geometry, Mask, RasterGrid, VectorField};

/// Observed cell: index, normalised weight, radar thickness.
pub(crate) type RadarCell = (usize, f64, f64);

pub(crate) fn radar_cells(obs: &ObservationLayer, valid: Option<&Mask>, floor: f64) -> Vec<RadarCell> {
    let mut cells: Vec<RadarCell> = obs
        .mask
        .indices()
        .filter(|&i| valid.is_none_or(|v| v.cells()[i]))
        .map(|i| (i, obs.confidence.values()[i].max(floor), obs.h_rad.values()[i]))
        .collect();
    let z: f64 = cells.iter().map(|c| c.1).sum();
    if z > 0.0 {
        cells.iter_mut().for_each(|c| c.1 /= z);
    }
    cells
}

pub(crate) fn radar_kernel(h: &[f64], cells: &[RadarCell], delta: f64, coef: f64, grad: Option<&mut [f64]>) -> f64 {
    let mut value = 0.0;
    match grad {
        Some(g) => {
            for &(i, w, hr) in cells {
                let (v, d) = huber(h[i] - hr, delta);
                value += w * v;
                g[i] += coef * w * d;
            }
        }
        None => {
            for &(i, w, hr) in cells {
                value += w * huber(h[i] - hr, delta).0;
            }
        }
    }
    value
}

/// Cellwise weights `1/N` on valid cells, 0 elsewhere.
pub(crate) fn mean_weights(valid: &Mask) -> Vec<f64> {
    let n = valid.count().max(1) as f64;
    valid.cells().iter().map(|&v| if v { 1.0 / n } else { 0.0 }).collect()
}

pub(crate) struct FlowTv<'a> {
    pub ux: &'a [f64],
    pub uy: &'a [f64],
    pub weights: &'a [f64],
    pub beta_perp: f64,
    pub beta_par: f64,
    pub eta: f64,
}

/// Unit flow direction `v / (|v| + eps)`.
pub(crate) fn unit_flow(v: &VectorField, eps: f64) -> (Vec<f64>, Vec<f64>) {
    v.x.values()
        .iter()
        .zip(v.y.values())
        .map(|(&x, &y)| {
            let n = x.hypot(y) + eps;
            (x / n, y / n)
        })
        .unzip()
}

/// Anisotropic TV on per-cell differences of `h`.
pub(crate) fn flow_tv_kernel(h: &[f64], rows: usize, cols: usize, p: &FlowTv, coef: f64, grad: Option<&mut [f64]>) -> f64 {
    let n = rows * cols;
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    diff_x(h, rows, cols, 1.0, &mut gx);
    diff_y(h, rows, cols, 1.0, &mut gy);
    let mut value = 0.0;
    let want_grad = grad.is_some();
    for i in 0..n {
        let w = p.weights[i];
        if w == 0.0 {
            gx[i] = 0.0;
            gy[i] = 0.0;
            continue;
        }
        let (ux, uy) = (p.ux[i], p.uy[i]);
        let along = gx[i] * ux + gy[i] * uy;
        let across = -gx[i] * uy + gy[i] * ux;
        let (va, da) = smooth_abs(along, p.eta);
        let (vc, dc) = smooth_abs(across, p.eta);
        value += w * (p.beta_perp * vc + p.beta_par * va);
        if want_grad {
            let (ga, gc) = (coef * w * p.beta_par * da, coef * w * p.beta_perp * dc);
            gx[i] = ga * ux - gc * uy;
            gy[i] = ga * uy + gc * ux;
        }
    }
    if let Some(g) = grad {
        diff_x_adjoint(&gx, rows, cols, 1.0, g);
        diff_y_adjoint(&gy, rows, cols, 1.0, g);
    }
    value
}

pub(crate) fn laplacian_kernel(
    r: &[f64],
    rows: usize,
    cols: usize,
    weights: &[f64],
    eta: f64,
    coef: f64,
    grad: Option<&mut [f64]>,
) -> f64 {
    let mut lap = vec![0.0; rows * cols];
    laplacian_into(r, rows, cols, &mut lap);
    let mut value = 0.0;
    for (l, &w) in lap.iter_mut().zip(weights) {
        let (v, d) = smooth_abs(*l, eta);
        value += w * v;
        *l = coef * w * d;
    }
    if let Some(g) = grad {
        laplacian_adjoint(&lap, rows, cols, g);
    }
    value
}

pub(crate) fn nonneg_kernel(h: &[f64], weights: &[f64], coef: f64, grad: Option<&mut [f64]>) -> f64 {
    let mut value = 0.0;
    match grad {
        Some(g) => {
            for i in 0..h.len() {
                let neg = (-h[i]).max(0.0);
                value += weights[i] * neg * neg;
                g[i] -= coef * weights[i] * 2.0 * neg;
            }
        }
        None => {
            for i in 0..h.len() {
                let neg = (-h[i]).max(0.0);
                value += weights[i] * neg * neg;
            }
        }
    }
    value
}

/// Prior misfit on `b - b_p`. The gradient is taken with respect to the bed.
pub(crate) fn prior_kernel(b: &[f64], bp: &[f64], weights: &[f64], delta: f64, coef: f64, grad: Option<&mut [f64]>) -> f64 {
    let mut value = 0.0;
    let mut g = grad;
    for i in 0..b.len() {
        let w = weights[i];
        if w == 0.0 {
            continue;
        }
        let (v, d) = huber(b[i] - bp[i], delta);
        value += w * v;
        if let Some(g) = g.as_deref_mut() {
            g[i] += coef * w * d;
        }
    }
    value
}

/// Pooled and smoothed pieces of the mass residual at one scale.
#[derive(Debug, Clone)]
pub(crate) struct MassScale {
    pub k: usize,
    pub rows: usize,
    pub cols: usize,
    pub spacing: f64,
    pub taps: Vec<f64>,
    /// Smoothed, pooled `dhdt - smb`.
    pub forcing: Vec<f64>,
    /// Per-cell weight on the pooled grid, already divided by the cell count.
    pub weights: Vec<f64>,
}

impl MassScale {
    /// `conf_weight` is the full-resolution weight (e.g. `(1 - c)^q`),
    /// `valid` the cells whose residual may count. Cells closer than the
    /// smoothing radius plus one to the pooled grid edge are left out. Returns
    /// `None` when the pooled grid is too small or no cell remains.
    pub fn new(
        k: usize,
        geom: &Geometry,
        dhdt: &[f64],
        smb: &[f64],
        conf_weight: &[f64],
        valid: &[bool],
        kernel: SmoothKernel,
    ) -> Result<Option<Self>> {
        let (h, w) = (geom.height, geom.width);
        let (rows, cols) = pooled_dims(h, w, k);
        if rows < 3 || cols < 3 {
            return Ok(None);
        }
        let taps = gaussian_kernel(kernel.size, kernel.sigma)?;
        let margin = if kernel.size > 1 { kernel.size / 2 + 1 } else { 0 };
        let n = rows * cols;
        let mut scratch = vec![0.0; n];
        let forcing_full: Vec<f64> = dhdt.iter().zip(smb).map(|(a, b)| a - b).collect();
        let mut pooled = vec![0.0; n];
        pool_into(&forcing_full, h, w, k, &mut pooled);
        let mut forcing = vec![0.0; n];
        smooth_into(&pooled, rows, cols, &taps, &mut scratch, &mut forcing);

        let valid_f: Vec<f64> = valid.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
        let mut pooled_valid = vec![0.0; n];
        pool_into(&valid_f, h, w, k, &mut pooled_valid);
        let mut pooled_conf = vec![0.0; n];
        pool_into(conf_weight, h, w, k, &mut pooled_conf);

        let mut weights = vec![0.0; n];
        let mut count = 0usize;
        for r in margin..rows.saturating_sub(margin) {
            for c in margin..cols.saturating_sub(margin) {
                let i = r * cols + c;
                if pooled_valid[i] == 1.0 {
                    weights[i] = pooled_conf[i];
                    count += 1;
                }
            }
        }
        if count == 0 {
            return Ok(None);
        }
        weights.iter_mut().for_each(|x| *x /= count as f64);
        Ok(Some(Self { k, rows, cols, spacing: geom.spacing * k as f64, taps, forcing, weights }))
    }

    /// Residual `div(S P(h v)) + S P(dhdt - smb)` on the pooled grid.
    fn residual(&self, h: &[f64], vx: &[f64], vy: &[f64], full: (usize, usize)) -> Residual {
        let (fh, fw) = full;
        let n = self.rows * self.cols;
        let fx: Vec<f64> = h.iter().zip(vx).map(|(a, b)| a * b).collect();
        let fy: Vec<f64> = h.iter().zip(vy).map(|(a, b)| a * b).collect();
        let mut scratch = vec![0.0; n];
        let mut px = vec![0.0; n];
        let mut py = vec![0.0; n];
        pool_into(&fx, fh, fw, self.k, &mut px);
        pool_into(&fy, fh, fw, self.k, &mut py);
        let mut sx = vec![0.0; n];
        let mut sy = vec![0.0; n];
        smooth_into(&px, self.rows, self.cols, &self.taps, &mut scratch, &mut sx);
        smooth_into(&py, self.rows, self.cols, &self.taps, &mut scratch, &mut sy);
        let mut r = vec![0.0; n];
        diff_x(&sx, self.rows, self.cols, self.spacing, &mut r);
        diff_y(&sy, self.rows, self.cols, self.spacing, &mut scratch);
        for i in 0..n {
            r[i] += scratch[i] + self.forcing[i];
        }
        Residual { r, scratch }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn kernel(
        &self,
        h: &[f64],
        vx: &[f64],
        vy: &[f64],
        full: (usize, usize),
        delta: f64,
        coef: f64,
        grad: Option<&mut [f64]>,
    ) -> f64 {
        let Residual { r, mut scratch } = self.residual(h, vx, vy, full);
        let n = r.len();
        let mut value = 0.0;
        let mut g_r = vec![0.0; n];
        for i in 0..n {
            let w = self.weights[i];
            if w != 0.0 {
                let (v, d) = huber(r[i], delta);
                value += w * v;
                g_r[i] = coef * w * d;
            }
        }
        let Some(grad) = grad else { return value };
        let mut g_sx = vec![0.0; n];
        let mut g_sy = vec![0.0; n];
        diff_x_adjoint(&g_r, self.rows, self.cols, self.spacing, &mut g_sx);
        diff_y_adjoint(&g_r, self.rows, self.cols, self.spacing, &mut g_sy);
        let mut g_px = vec![0.0; n];
        let mut g_py = vec![0.0; n];
        smooth_adjoint(&g_sx, self.rows, self.cols, &self.taps, &mut scratch, &mut g_px);
        smooth_adjoint(&g_sy, self.rows, self.cols, &self.taps, &mut scratch, &mut g_py);
        let (fh, fw) = full;
        let mut g_fx = vec![0.0; fh * fw];
        let mut g_fy = vec![0.0; fh * fw];
        pool_adjoint(&g_px, fh, fw, self.k, &mut g_fx);
        pool_adjoint(&g_py, fh, fw, self.k, &mut g_fy);
        for i in 0..fh * fw {
            grad[i] += g_fx[i] * vx[i] + g_fy[i] * vy[i];
        }
        value
    }
}

struct Residual {
    r: Vec<f64>,
    scratch: Vec<f64>,
}

/// `dhdt + div(h v) - smb` at pooling factor `k`, with flux and forcing pooled
/// and then smoothed by `kernel` before the divergence. Every cell is
/// returned, including those near edges that the mass loss leaves out.
pub fn mass_residual(h: &RasterGrid, scene: &Scene, k: usize, kernel: SmoothKernel) -> Result<RasterGrid> {
    if !h.geometry().same_shape(scene.geometry()) {
        return Err(dim("thickness and scene differ in shape"));
    }
    let geom = *scene.geometry();
    let (rows, cols) = pooled_dims(geom.height, geom.width, k.max(1));
    if k == 0 || rows < 3 || cols < 3 {
        return Err(crate::error::param(format!("pooling by {k} leaves fewer than 3x3 cells")));
    }
    let taps = gaussian_kernel(kernel.size, kernel.sigma)?;
    let mut forcing = vec![0.0; rows * cols];
    let mut pooled = vec![0.0; rows * cols];
    let mut scratch = vec![0.0; rows * cols];
    let full: Vec<f64> = scene.dhdt().values().iter().zip(scene.smb().values()).map(|(a, b)| a - b).collect();
    pool_into(&full, geom.height, geom.width, k, &mut pooled);
    smooth_into(&pooled, rows, cols, &taps, &mut scratch, &mut forcing);
    let ms = MassScale {
        k,
        rows,
        cols,
        spacing: geom.spacing * k as f64,
        taps,
        forcing,
        weights: vec![1.0; rows * cols],
    };
    let v = scene.velocity();
    let res = ms.residual(h.values(), v.x.values(), v.y.values(), (geom.height, geom.width));
    RasterGrid::new(Geometry::new(rows, cols, ms.spacing, geom.origin)?, res.r)
}

/// Weighted mean radar misfit `sum(m w rho(h - h_rad)) / sum(m w)` with
/// `w = max(floor, c)`, and its gradient with respect to `h`.
pub fn loss_radar(h: &RasterGrid, obs: &ObservationLayer, delta: f64, floor: f64) -> Result<(f64, RasterGrid)> {
    if !h.geometry().same_shape(obs.geometry()) {
        return Err(dim("thickness and observations differ in shape"));
    }
    let cells = radar_cells(obs, None, floor);
    if cells.iter().map(|c| c.1).sum::<f64>() == 0.0 {
        return Err(Error::EmptyObservations("radar loss has no weighted observations".into()));
    }
    let mut g = vec![0.0; h.values().len()];
    let v = radar_kernel(h.values(), &cells, delta, 1.0, Some(&mut g));
    Ok((v, RasterGrid::new(*h.geometry(), g)?))
}

/// Mean of `beta_perp |grad h . u_perp| + beta_par |grad h . u|` over all
/// cells, with per-cell differences and smoothed absolute values.
pub fn loss_flow_tv(
    h: &RasterGrid,
    v: &VectorField,
    beta_perp: f64,
    beta_par: f64,
    eps: f64,
    eta: f64,
) -> Result<(f64, RasterGrid)> {
    if !h.geometry().same_shape(v.geometry()) {
        return Err(dim("thickness and velocity differ in shape"));
    }
    let geom = *h.geometry();
    let (ux, uy) = unit_flow(v, eps);
    let weights = mean_weights(&Mask::filled(geom, true));
    let p = FlowTv { ux: &ux, uy: &uy, weights: &weights, beta_perp, beta_par, eta };
    let mut g = vec![0.0; geom.len()];
    let val = flow_tv_kernel(h.values(), geom.height, geom.width, &p, 1.0, Some(&mut g));
    Ok((val, RasterGrid::new(geom, g)?))
}

/// Mean smoothed `|laplacian(r)|` over all cells.
pub fn loss_laplacian(r: &RasterGrid, eta: f64) -> Result<(f64, RasterGrid)> {
    let geom = *r.geometry();
    let weights = mean_weights(&Mask::filled(geom, true));
    let mut g = vec![0.0; geom.len()];
    let val = laplacian_kernel(r.values(), geom.height, geom.width, &weights, eta, 1.0, Some(&mut g));
    Ok((val, RasterGrid::new(geom, g)?))
}

/// Mean of `max(0, -h)^2`.
pub fn loss_nonneg(h: &RasterGrid) -> Result<(f64, RasterGrid)> {
    let geom = *h.geometry();
    let weights = mean_weights(&Mask::filled(geom, true));
    let mut g = vec![0.0; geom.len()];
    let val = nonneg_kernel(h.values(), &weights, 1.0, Some(&mut g));
    Ok((val, RasterGrid::new(geom, g)?))
}

/// `exp(-|grad b_p| / s90)` with `s90` the 90th percentile of the slope over
/// valid cells (linear interpolation), floored at `floor`.
pub fn slope_weight(prior_bed: &RasterGrid, valid: &Mask, floor: f64) -> Result<RasterGrid> {
    let mag = gradient(prior_bed)?.magnitude();
    let mut vals: Vec<f64> = valid.indices().map(|i| mag.values()[i]).collect();
    if vals.is_empty() {
        return Err(Error::InsufficientData("no valid cells for the slope percentile".into()));
    }
    vals.sort_by(f64::total_cmp);
    let pos = 0.9 * (vals.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let s90 = (vals[lo] + (vals[hi] - vals[lo]) * (pos - lo as f64)).max(floor);
    Ok(mag.map(|m| (-m / s90).exp()))
}

/// Mean of `(1 - m)(1 - c)^2 w rho(b - b_p)` over all cells, gradient with
/// respect to `b`.
pub fn loss_prior(
    b: &RasterGrid,
    prior_bed: &RasterGrid,
    obs: &ObservationLayer,
    slope_w: &RasterGrid,
    delta: f64,
) -> Result<(f64, RasterGrid)> {
    b.check_same_shape(prior_bed)?;
    b.check_same_shape(slope_w)?;
    let geom = *b.geometry();
    let n = geom.len() as f64;
    let weights: Vec<f64> = (0..geom.len())
        .map(|i| {
            if obs.mask.cells()[i] {
                0.0
            } else {
                (1.0 - obs.confidence.values()[i]).powi(2) * slope_w.values()[i] / n
            }
        })
        .collect();
    let mut g = vec![0.0; geom.len()];
    let val = prior_kernel(b.values(), prior_bed.values(), &weights, delta, 1.0, Some(&mut g));
    Ok((val, RasterGrid::new(geom, g)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_scene, ObsConfig, SynthParams};
    use crate::grid::DihedralElement;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(g: Geometry, lo: f64, hi: f64, seed: u64) -> RasterGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RasterGrid::new(g, (0..g.len()).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
    }

    fn single_cell_obs(g: Geometry, h_rad: f64) -> ObservationLayer {
        let mut mask = Mask::filled(g, false);
        mask.set(1, 1, true);
        let mut hr = RasterGrid::zeros(g);
        hr.set(1, 1, h_rad);
        let d = crate::grid::distance_transform(&mask).unwrap();
        let c = crate::data::confidence_map(&d, 12.0).unwrap();
        ObservationLayer { mask, h_rad: hr, d_rad: d, confidence: c }
    }

    #[test]
    fn radar_examples() {
        let g = Geometry::unit(4, 4).unwrap();
        let obs = single_cell_obs(g, 100.0);
        let mut h = RasterGrid::filled(g, 3.0);
        h.set(1, 1, 100.0);
        assert_eq!(loss_radar(&h, &obs, 1.0, 0.05).unwrap().0, 0.0);
        h.set(1, 1, 100.5);
        let (v, gr) = loss_radar(&h, &obs, 1.0, 0.05).unwrap();
        assert_eq!(v, 0.125);
        assert_eq!(gr.get(1, 1), 0.5);
        assert_eq!(gr.values().iter().filter(|&&x| x != 0.0).count(), 1);
    }

    #[test]
    fn radar_matches_direct_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = synth_scene(2, &SynthParams { height: 32, width: 32, ..Default::default() }).unwrap();
        let obs = ObservationLayer::build(&s.picks, &s.scene, &ObsConfig::default()).unwrap();
        let g = *s.scene.geometry();
        let h = RasterGrid::from_index_fn(g, |_, _| rng.random_range(900.0..1600.0));
        let (v, _) = loss_radar(&h, &obs, 1.0, 0.05).unwrap();
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..g.len() {
            if obs.mask.cells()[i] {
                let w = obs.confidence.values()[i].max(0.05);
                num += w * huber(h.values()[i] - obs.h_rad.values()[i], 1.0).0;
                den += w;
            }
        }
        assert!((v - num / den).abs() <= 1e-9 * v.abs());
    }

    #[test]
    fn mass_residual_linear_cases() {
        let g = Geometry::unit(9, 9).unwrap();
        let h = RasterGrid::filled(g, 10.0);
        let v = VectorField::new(RasterGrid::from_fn(g, |x, _| 0.3 * x), RasterGrid::zeros(g)).unwrap();
        let sc = Scene::new(RasterGrid::filled(g, 20.0), v, RasterGrid::filled(g, 3.0), RasterGrid::zeros(g), RasterGrid::filled(g, 10.0)).unwrap();
        let r = mass_residual(&h, &sc, 1, SmoothKernel::IDENTITY).unwrap();
        assert!(r.max_abs() < 1e-12);

        let v = VectorField::new(RasterGrid::filled(g, 2.0), RasterGrid::filled(g, -1.0)).unwrap();
        let sc = Scene::new(RasterGrid::filled(g, 20.0), v, RasterGrid::zeros(g), RasterGrid::zeros(g), RasterGrid::filled(g, 10.0)).unwrap();
        assert_eq!(mass_residual(&h, &sc, 1, SmoothKernel::IDENTITY).unwrap().max_abs(), 0.0);
        assert_eq!(mass_residual(&h, &sc, 2, SmoothKernel { size: 3, sigma: 1.0 }).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn flow_tv_examples() {
        let g = Geometry::unit(8, 8).unwrap();
        let v = VectorField::new(RasterGrid::filled(g, 1.0), RasterGrid::zeros(g)).unwrap();
        let (c, _) = loss_flow_tv(&RasterGrid::filled(g, 5.0), &v, 0.9, 0.35, 1e-3, 1e-3).unwrap();
        assert_eq!(c, 0.0);
        // Varies along x only: the cross-flow part vanishes.
        let h = RasterGrid::from_fn(g, |x, _| 2.0 * x);
        let (val, _) = loss_flow_tv(&h, &v, 0.9, 0.35, 1e-3, 1e-3).unwrap();
        let u = 1.0 / (1.0 + 1e-3);
        let expected = 0.35 * ((4.0 * u * u + 1e-6f64).sqrt() - 1e-3);
        assert!((val - expected).abs() < 1e-12);
        // Same magnitude across flow costs more.
        let hy = RasterGrid::from_fn(g, |_, y| 2.0 * y);
        assert!(loss_flow_tv(&hy, &v, 0.9, 0.35, 1e-3, 1e-3).unwrap().0 > val);
    }

    #[test]
    fn flow_tv_rotation_invariant() {
        let g = Geometry::new(16, 16, 50.0, (0.0, 0.0)).unwrap();
        let h = random_grid(g, 0.0, 100.0, 1);
        let v = VectorField::new(random_grid(g, -50.0, 50.0, 2), random_grid(g, -50.0, 50.0, 3)).unwrap();
        let (base, _) = loss_flow_tv(&h, &v, 0.9, 0.35, 1e-3, 1e-3).unwrap();
        for e in DihedralElement::all() {
            let ht = e.apply_grid(&h).unwrap();
            let (vx, vy) = e.apply_pair(&v.x, &v.y).unwrap();
            let vt = VectorField::new(vx, vy).unwrap();
            let (val, _) = loss_flow_tv(&ht, &vt, 0.9, 0.35, 1e-3, 1e-3).unwrap();
            assert!((val - base).abs() <= 1e-9 * base, "{e:?}: {val} vs {base}");
        }
    }

    #[test]
    fn laplacian_and_nonneg_examples() {
        let g = Geometry::unit(6, 7).unwrap();
        assert_eq!(loss_laplacian(&RasterGrid::filled(g, 3.0), 1e-3).unwrap().0, 0.0);
        let r = random_grid(g, -5.0, 5.0, 4);
        let neg = r.map(|x| -x);
        assert_eq!(loss_laplacian(&r, 1e-3).unwrap().0, loss_laplacian(&neg, 1e-3).unwrap().0);

        let (v, gr) = loss_nonneg(&RasterGrid::filled(g, 1.0)).unwrap();
        assert_eq!(v, 0.0);
        assert!(gr.values().iter().all(|&x| x == 0.0));
        let mut h = RasterGrid::filled(g, 1.0);
        h.set(2, 3, -2.0);
        assert_eq!(loss_nonneg(&h).unwrap().0, 4.0 / 42.0);
    }

    #[test]
    fn prior_examples() {
        let g = Geometry::unit(6, 6).unwrap();
        let obs = single_cell_obs(g, 0.0);
        let bp = random_grid(g, -10.0, 10.0, 5);
        let valid = Mask::filled(g, true);
        let sw = slope_weight(&RasterGrid::filled(g, 1.0), &valid, 1e-6).unwrap();
        assert!(sw.values().iter().all(|&x| x == 1.0));
        let sw = slope_weight(&bp, &valid, 1e-6).unwrap();
        assert_eq!(loss_prior(&bp, &bp, &obs, &sw, 10.0).unwrap().0, 0.0);
        // Only the pick cell differs: masked out.
        let mut b = bp.clone();
        b.set(1, 1, 1e4);
        assert_eq!(loss_prior(&b, &bp, &obs, &sw, 10.0).unwrap().0, 0.0);
    }

    #[test]
    fn slope_percentile_matches_sort() {
        let g = Geometry::unit(10, 10).unwrap();
        let bp = random_grid(g, 0.0, 10.0, 6);
        let valid = Mask::filled(g, true);
        let w = slope_weight(&bp, &valid, 1e-6).unwrap();
        let mag = gradient(&bp).unwrap().magnitude();
        let mut v = mag.values().to_vec();
        v.sort_by(f64::total_cmp);
        let s90 = v[89] + 0.1 * (v[90] - v[89]);
        for i in 0..g.len() {
            assert!((w.values()[i] - (-mag.values()[i] / s90).exp()).abs() < 1e-14);
        }
    }
}
