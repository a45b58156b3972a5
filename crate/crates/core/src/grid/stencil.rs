//! Finite-difference and convolution stencils.
//!
//! The slice kernels operate on row-major `h x w` buffers and come paired with
//! their exact adjoints, which the loss gradients are assembled from. Adjoint
//! kernels accumulate into their output buffer.

use super::{Geometry, RasterGrid, VectorField};
use crate::error::{dim, param, Result};

/// Mirror index without repeating the edge sample (`-1 -> 1`, `n -> n - 2`).
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut k = i.rem_euclid(period);
    if k >= n as isize {
        k = period - k;
    }
    k as usize
}

/// One-dimensional derivative with central differences inside and one-sided
/// differences at both ends. `stride` walks the axis, `n` is its length.
#[inline]
fn diff_line(src: &[f64], dst: &mut [f64], base: usize, stride: usize, n: usize, spacing: f64) {
    if n == 1 {
        dst[base] = 0.0;
        return;
    }
    let at = |k: usize| base + k * stride;
    let inv = 1.0 / spacing;
    let half = 0.5 / spacing;
    dst[at(0)] = (src[at(1)] - src[at(0)]) * inv;
    for k in 1..n - 1 {
        dst[at(k)] = (src[at(k + 1)] - src[at(k - 1)]) * half;
    }
    dst[at(n - 1)] = (src[at(n - 1)] - src[at(n - 2)]) * inv;
}

#[inline]
fn diff_line_adjoint(g: &[f64], acc: &mut [f64], base: usize, stride: usize, n: usize, spacing: f64) {
    if n == 1 {
        return;
    }
    let at = |k: usize| base + k * stride;
    let inv = 1.0 / spacing;
    let half = 0.5 / spacing;
    let g0 = g[at(0)] * inv;
    acc[at(0)] -= g0;
    acc[at(1)] += g0;
    for k in 1..n - 1 {
        let gk = g[at(k)] * half;
        acc[at(k + 1)] += gk;
        acc[at(k - 1)] -= gk;
    }
    let gn = g[at(n - 1)] * inv;
    acc[at(n - 1)] += gn;
    acc[at(n - 2)] -= gn;
}

pub(crate) fn diff_x(src: &[f64], h: usize, w: usize, spacing: f64, dst: &mut [f64]) {
    for r in 0..h {
        diff_line(src, dst, r * w, 1, w, spacing);
    }
}

pub(crate) fn diff_y(src: &[f64], h: usize, w: usize, spacing: f64, dst: &mut [f64]) {
    if h == 1 {
        dst[..w].iter_mut().for_each(|d| *d = 0.0);
        return;
    }
    let row = |k: usize| &src[k * w..(k + 1) * w];
    let (inv, half) = (1.0 / spacing, 0.5 / spacing);
    for (k, d) in dst[..h * w].chunks_exact_mut(w).enumerate() {
        let (hi, lo, f) = match k {
            0 => (1, 0, inv),
            k if k == h - 1 => (h - 1, h - 2, inv),
            k => (k + 1, k - 1, half),
        };
        for ((x, a), b) in d.iter_mut().zip(row(hi)).zip(row(lo)) {
            *x = (a - b) * f;
        }
    }
}

pub(crate) fn diff_x_adjoint(g: &[f64], h: usize, w: usize, spacing: f64, acc: &mut [f64]) {
    for r in 0..h {
        diff_line_adjoint(g, acc, r * w, 1, w, spacing);
    }
}

pub(crate) fn diff_y_adjoint(g: &[f64], h: usize, w: usize, spacing: f64, acc: &mut [f64]) {
    if h == 1 {
        return;
    }
    let (inv, half) = (1.0 / spacing, 0.5 / spacing);
    for k in 0..h {
        let (hi, lo, f) = match k {
            0 => (1, 0, inv),
            k if k == h - 1 => (h - 1, h - 2, inv),
            k => (k + 1, k - 1, half),
        };
        let gk = &g[k * w..(k + 1) * w];
        for (a, &x) in acc[hi * w..(hi + 1) * w].iter_mut().zip(gk) {
            *a += x * f;
        }
        for (a, &x) in acc[lo * w..(lo + 1) * w].iter_mut().zip(gk) {
            *a -= x * f;
        }
    }
}

/// Five-point kernel `[[0,-1,0],[-1,4,-1],[0,-1,0]]` with reflect padding, in
/// cell units (no spacing factor).
pub(crate) fn laplacian_into(src: &[f64], h: usize, w: usize, dst: &mut [f64]) {
    for r in 0..h {
        let up = reflect(r as isize + 1, h);
        let down = reflect(r as isize - 1, h);
        for c in 0..w {
            let left = if c > 0 { c - 1 } else { reflect(-1, w) };
            let right = if c + 1 < w { c + 1 } else { reflect(c as isize + 1, w) };
            dst[r * w + c] = 4.0 * src[r * w + c]
                - src[up * w + c]
                - src[down * w + c]
                - src[r * w + left]
                - src[r * w + right];
        }
    }
}

pub(crate) fn laplacian_adjoint(g: &[f64], h: usize, w: usize, acc: &mut [f64]) {
    for r in 0..h {
        let up = reflect(r as isize + 1, h);
        let down = reflect(r as isize - 1, h);
        for c in 0..w {
            let left = if c > 0 { c - 1 } else { reflect(-1, w) };
            let right = if c + 1 < w { c + 1 } else { reflect(c as isize + 1, w) };
            let gi = g[r * w + c];
            acc[r * w + c] += 4.0 * gi;
            acc[up * w + c] -= gi;
            acc[down * w + c] -= gi;
            acc[r * w + left] -= gi;
            acc[r * w + right] -= gi;
        }
    }
}

/// Normalized 1-D Gaussian taps.
pub(crate) fn gaussian_kernel(size: usize, sigma: f64) -> Result<Vec<f64>> {
    if size == 0 || size.is_multiple_of(2) {
        return Err(param(format!("smoothing window must be odd and positive, got {size}")));
    }
    if !(sigma > 0.0) {
        return Err(param(format!("smoothing sigma must be positive, got {sigma}")));
    }
    let r = (size / 2) as isize;
    let mut taps: Vec<f64> = (-r..=r).map(|m| (-((m * m) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    Ok(taps)
}

/// Convolution of one contiguous line with reflected ends.
fn conv_line(src: &[f64], dst: &mut [f64], taps: &[f64]) {
    let n = src.len();
    let r = taps.len() / 2;
    for (k, d) in dst.iter_mut().enumerate() {
        *d = if k >= r && k + r < n {
            src[k - r..=k + r].iter().zip(taps).map(|(a, b)| a * b).sum()
        } else {
            taps.iter().enumerate().map(|(t, &wt)| wt * src[reflect(k as isize - r as isize + t as isize, n)]).sum()
        };
    }
}

fn conv_line_adjoint(g: &[f64], acc: &mut [f64], taps: &[f64]) {
    let n = g.len();
    let r = taps.len() / 2;
    for (k, &gk) in g.iter().enumerate() {
        if gk == 0.0 {
            continue;
        }
        if k >= r && k + r < n {
            for (a, &wt) in acc[k - r..=k + r].iter_mut().zip(taps) {
                *a += wt * gk;
            }
        } else {
            for (t, &wt) in taps.iter().enumerate() {
                acc[reflect(k as isize - r as isize + t as isize, n)] += wt * gk;
            }
        }
    }
}

/// Separable convolution (x pass then y pass). `scratch` must hold `h * w`.
pub(crate) fn smooth_into(src: &[f64], h: usize, w: usize, taps: &[f64], scratch: &mut [f64], dst: &mut [f64]) {
    if taps.len() == 1 {
        dst.copy_from_slice(src);
        return;
    }
    for (s, d) in src.chunks_exact(w).zip(scratch.chunks_exact_mut(w)) {
        conv_line(s, d, taps);
    }
    let r = (taps.len() / 2) as isize;
    for (k, d) in dst[..h * w].chunks_exact_mut(w).enumerate() {
        d.iter_mut().for_each(|x| *x = 0.0);
        for (t, &wt) in taps.iter().enumerate() {
            let sr = reflect(k as isize - r + t as isize, h);
            for (x, y) in d.iter_mut().zip(&scratch[sr * w..(sr + 1) * w]) {
                *x += wt * y;
            }
        }
    }
}

/// Adjoint of [`smooth_into`]; accumulates into `acc`.
pub(crate) fn smooth_adjoint(g: &[f64], h: usize, w: usize, taps: &[f64], scratch: &mut [f64], acc: &mut [f64]) {
    if taps.len() == 1 {
        acc.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        return;
    }
    scratch.iter_mut().for_each(|s| *s = 0.0);
    let r = (taps.len() / 2) as isize;
    for (k, gr) in g[..h * w].chunks_exact(w).enumerate() {
        for (t, &wt) in taps.iter().enumerate() {
            let sr = reflect(k as isize - r + t as isize, h);
            for (x, y) in scratch[sr * w..(sr + 1) * w].iter_mut().zip(gr) {
                *x += wt * y;
            }
        }
    }
    for (s, a) in scratch.chunks_exact(w).zip(acc.chunks_exact_mut(w)) {
        conv_line_adjoint(s, a, taps);
    }
}

#[inline]
pub(crate) fn pooled_dims(h: usize, w: usize, k: usize) -> (usize, usize) {
    (h.div_ceil(k), w.div_ceil(k))
}

/// Block means over `k x k` windows; trailing partial blocks average over
/// the cells they actually contain.
pub(crate) fn pool_into(src: &[f64], h: usize, w: usize, k: usize, dst: &mut [f64]) {
    if k == 1 {
        dst.copy_from_slice(src);
        return;
    }
    let (ph, pw) = pooled_dims(h, w, k);
    dst[..ph * pw].iter_mut().for_each(|d| *d = 0.0);
    for r in 0..h {
        let pr = r / k;
        for c in 0..w {
            dst[pr * pw + c / k] += src[r * w + c];
        }
    }
    for pr in 0..ph {
        let rows = (h - pr * k).min(k);
        for pc in 0..pw {
            let cols = (w - pc * k).min(k);
            dst[pr * pw + pc] /= (rows * cols) as f64;
        }
    }
}

pub(crate) fn pool_adjoint(g: &[f64], h: usize, w: usize, k: usize, acc: &mut [f64]) {
    if k == 1 {
        acc.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        return;
    }
    let (_, pw) = pooled_dims(h, w, k);
    for r in 0..h {
        let pr = r / k;
        let rows = (h - pr * k).min(k);
        for c in 0..w {
            let pc = c / k;
            let cols = (w - pc * k).min(k);
            acc[r * w + c] += g[pr * pw + pc] / (rows * cols) as f64;
        }
    }
}

fn check_stencil_size(g: &Geometry) -> Result<()> {
    if g.height < 3 || g.width < 3 {
        return Err(dim(format!("stencils need at least 3x3 cells, got {}x{}", g.height, g.width)));
    }
    Ok(())
}

/// `(df/dx, df/dy)` in field units per meter.
pub fn gradient(f: &RasterGrid) -> Result<VectorField> {
    let g = *f.geometry();
    check_stencil_size(&g)?;
    let mut gx = vec![0.0; g.len()];
    let mut gy = vec![0.0; g.len()];
    diff_x(f.values(), g.height, g.width, g.spacing, &mut gx);
    diff_y(f.values(), g.height, g.width, g.spacing, &mut gy);
    VectorField::new(RasterGrid::new(g, gx)?, RasterGrid::new(g, gy)?)
}

/// `dFx/dx + dFy/dy` with the same stencil as [`gradient`].
pub fn divergence(field: &VectorField) -> Result<RasterGrid> {
    let g = *field.geometry();
    check_stencil_size(&g)?;
    let mut out = vec![0.0; g.len()];
    let mut tmp = vec![0.0; g.len()];
    diff_x(field.x.values(), g.height, g.width, g.spacing, &mut out);
    diff_y(field.y.values(), g.height, g.width, g.spacing, &mut tmp);
    out.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
    RasterGrid::new(g, out)
}

/// Convolution with the five-point kernel (positive centre), reflect padded.
///
/// In the interior this equals `-div(grad f) * spacing^2` whenever both
/// stencils are exact, i.e. for polynomials up to cubic order; the central
/// difference composition is the wide (stride 2) Laplacian, so the two differ
/// on rougher fields.
pub fn laplacian(f: &RasterGrid) -> Result<RasterGrid> {
    let g = *f.geometry();
    check_stencil_size(&g)?;
    let mut out = vec![0.0; g.len()];
    laplacian_into(f.values(), g.height, g.width, &mut out);
    RasterGrid::new(g, out)
}

/// Separable Gaussian blur with a normalized `size`-tap kernel.
pub fn gaussian_smooth(f: &RasterGrid, size: usize, sigma: f64) -> Result<RasterGrid> {
    let taps = gaussian_kernel(size, sigma)?;
    let g = *f.geometry();
    let mut scratch = vec![0.0; g.len()];
    let mut out = vec![0.0; g.len()];
    smooth_into(f.values(), g.height, g.width, &taps, &mut scratch, &mut out);
    RasterGrid::new(g, out)
}

/// Block-mean downsampling by `k`; the result carries spacing `k * spacing`.
pub fn avg_pool(f: &RasterGrid, k: usize) -> Result<RasterGrid> {
    if k == 0 {
        return Err(param("pooling factor must be positive"));
    }
    let g = *f.geometry();
    let (ph, pw) = pooled_dims(g.height, g.width, k);
    let geom = Geometry::new(ph, pw, g.spacing * k as f64, g.origin)?;
    let mut out = vec![0.0; ph * pw];
    pool_into(f.values(), g.height, g.width, k, &mut out);
    RasterGrid::new(geom, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect(-1, 5), 1);
        assert_eq!(reflect(-2, 5), 2);
        assert_eq!(reflect(5, 5), 3);
        assert_eq!(reflect(6, 5), 2);
        assert_eq!(reflect(12, 3), 0);
        assert_eq!(reflect(-7, 1), 0);
        for i in 0..5 {
            assert_eq!(reflect(i, 5), i as usize);
        }
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = Geometry::unit(5, 6).unwrap();
        let v = gradient(&RasterGrid::filled(g, 3.5)).unwrap();
        assert!(v.x.values().iter().chain(v.y.values()).all(|&d| d == 0.0));
    }

    #[test]
    fn gradient_exact_on_linear_and_quadratic() {
        let g = Geometry::unit(6, 7).unwrap();
        let lin = RasterGrid::from_fn(g, |x, _| 2.0 * x);
        let v = gradient(&lin).unwrap();
        assert!(v.x.values().iter().all(|&d| (d - 2.0).abs() < 1e-12));
        assert!(v.y.values().iter().all(|&d| d == 0.0));

        let quad = RasterGrid::from_fn(g, |x, _| x * x);
        let v = gradient(&quad).unwrap();
        for r in 0..6 {
            for c in 1..6 {
                let (x, _) = g.cell_center(r, c);
                assert!((v.x.get(r, c) - 2.0 * x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn divergence_of_linear_field() {
        let g = Geometry::unit(5, 5).unwrap();
        let f = VectorField::new(RasterGrid::from_fn(g, |x, _| 3.0 * x), RasterGrid::zeros(g)).unwrap();
        let d = divergence(&f).unwrap();
        assert!(d.values().iter().all(|&v| (v - 3.0).abs() < 1e-12));
        let c = VectorField::new(RasterGrid::filled(g, 2.0), RasterGrid::filled(g, -1.0)).unwrap();
        assert!(divergence(&c).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn divergence_of_gradient_tracks_laplacian() {
        // Smooth field: the wide and compact Laplacians agree to O(h^2).
        let g = Geometry::new(40, 40, 1.0, (0.0, 0.0)).unwrap();
        let f = RasterGrid::from_fn(g, |x, y| (x / 9.0).sin() * (y / 11.0).cos() * 50.0);
        let dg = divergence(&gradient(&f).unwrap()).unwrap();
        let lap = laplacian(&f).unwrap();
        for r in 2..38 {
            for c in 2..38 {
                assert!((dg.get(r, c) + lap.get(r, c)).abs() < 0.01, "{r},{c}");
            }
        }
    }

    #[test]
    fn laplacian_read_off() {
        let g = Geometry::unit(5, 5).unwrap();
        assert!(laplacian(&RasterGrid::filled(g, 7.0)).unwrap().values().iter().all(|&v| v == 0.0));
        let ramp = laplacian(&RasterGrid::from_fn(g, |x, _| x)).unwrap();
        for r in 0..5 {
            for c in 1..4 {
                assert!(ramp.get(r, c).abs() < 1e-12);
            }
        }
        let mut imp = RasterGrid::zeros(g);
        imp.set(2, 2, 1.0);
        let l = laplacian(&imp).unwrap();
        assert_eq!(l.get(2, 2), 4.0);
        for (r, c) in [(1, 2), (3, 2), (2, 1), (2, 3)] {
            assert_eq!(l.get(r, c), -1.0);
        }
        assert_eq!(l.values().iter().filter(|&&v| v != 0.0).count(), 5);
    }

    #[test]
    fn laplacian_matches_negative_div_grad_on_cubics() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let co: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
            let spacing = rng.random_range(0.5..3.0);
            let g = Geometry::new(12, 14, spacing, (0.0, 0.0)).unwrap();
            let f = RasterGrid::from_fn(g, |x, y| {
                co[0] + co[1] * x + co[2] * y + co[3] * x * x + co[4] * x * y + co[5] * y * y
                    + co[6] * x * x * x + co[7] * x * x * y + co[8] * x * y * y + co[9] * y * y * y
            });
            let dg = divergence(&gradient(&f).unwrap()).unwrap();
            let lap = laplacian(&f).unwrap();
            for r in 2..10 {
                for c in 2..12 {
                    let want = -dg.get(r, c) * spacing * spacing;
                    let got = lap.get(r, c);
                    assert!((want - got).abs() <= 1e-6 * want.abs().max(1.0), "{want} vs {got}");
                }
            }
        }
    }

    #[test]
    fn smoothing_basics() {
        let g = Geometry::unit(20, 20).unwrap();
        let c = gaussian_smooth(&RasterGrid::filled(g, 4.2), 11, 3.5).unwrap();
        assert!(c.values().iter().all(|&v| (v - 4.2).abs() < 1e-12));
        let f = RasterGrid::new(g, random_vec(400, 3)).unwrap();
        assert_eq!(gaussian_smooth(&f, 1, 1.0).unwrap(), f);
        assert!(matches!(gaussian_smooth(&f, 4, 1.0), Err(crate::Error::Parameter(_))));
    }

    #[test]
    fn smoothed_impulse_mass_is_one() {
        // Direct summation of the separable kernel placed away from the boundary.
        let g = Geometry::unit(41, 41).unwrap();
        let mut imp = RasterGrid::zeros(g);
        imp.set(20, 20, 1.0);
        let s = gaussian_smooth(&imp, 11, 3.5).unwrap();
        let total: f64 = s.values().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let taps: Vec<f64> = (-5..=5_i32).map(|m| (-(m * m) as f64 / (2.0 * 3.5 * 3.5)).exp()).collect();
        let norm: f64 = taps.iter().sum();
        let want = taps[5 + 2] * taps[5 - 3] / (norm * norm);
        assert!((s.get(22, 17) - want).abs() < 1e-15);
    }

    #[test]
    fn pooling() {
        let g = Geometry::unit(4, 4).unwrap();
        let f = RasterGrid::new(g, random_vec(16, 1)).unwrap();
        assert_eq!(avg_pool(&f, 1).unwrap(), f);
        let small = Geometry::unit(6, 6).unwrap();
        let f = RasterGrid::from_index_fn(small, |r, c| if r < 2 && c < 2 { [1.0, 2.0, 3.0, 4.0][r * 2 + c] } else { 0.0 });
        let p = avg_pool(&f, 2).unwrap();
        assert_eq!(p.get(0, 0), 2.5);
        assert_eq!(p.spacing(), 2.0);
        assert!(matches!(avg_pool(&f, 0), Err(crate::Error::Parameter(_))));
    }

    #[test]
    fn pooled_mean_preserved_for_divisible_shapes() {
        let g = Geometry::unit(16, 24).unwrap();
        let f = RasterGrid::new(g, random_vec(16 * 24, 9)).unwrap();
        for k in [2, 4] {
            let p = avg_pool(&f, k).unwrap();
            let brute: f64 = f.values().iter().sum::<f64>() / f.values().len() as f64;
            assert!((p.mean() - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn partial_blocks_average_actual_cells() {
        let g = Geometry::unit(5, 5).unwrap();
        let f = RasterGrid::from_index_fn(g, |r, c| (r * 5 + c) as f64);
        let p = avg_pool(&f, 4).unwrap_err();
        assert!(matches!(p, crate::Error::Dimension(_)));
        let mut out = vec![0.0; 4];
        pool_into(f.values(), 5, 5, 4, &mut out);
        // Block (0, 1) holds column 4 of rows 0..4 only.
        assert_eq!(out[1], (4.0 + 9.0 + 14.0 + 19.0) / 4.0);
        assert_eq!(out[3], 24.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn adjoints_satisfy_dot_product_identity(h in 1usize..9, w in 1usize..9, seed in 0u64..1000, k in 1usize..5) {
            let n = h * w;
            let x = random_vec(n, seed);
            let y = random_vec(n, seed + 1);
            let spacing = 0.7;

            let mut ax = vec![0.0; n];
            diff_x(&x, h, w, spacing, &mut ax);
            let mut aty = vec![0.0; n];
            diff_x_adjoint(&y, h, w, spacing, &mut aty);
            prop_assert!((dot(&ax, &y) - dot(&x, &aty)).abs() < 1e-10);

            let mut ax = vec![0.0; n];
            diff_y(&x, h, w, spacing, &mut ax);
            let mut aty = vec![0.0; n];
            diff_y_adjoint(&y, h, w, spacing, &mut aty);
            prop_assert!((dot(&ax, &y) - dot(&x, &aty)).abs() < 1e-10);

            let mut ax = vec![0.0; n];
            laplacian_into(&x, h, w, &mut ax);
            let mut aty = vec![0.0; n];
            laplacian_adjoint(&y, h, w, &mut aty);
            prop_assert!((dot(&ax, &y) - dot(&x, &aty)).abs() < 1e-10);

            let taps = gaussian_kernel(5, 1.3).unwrap();
            let mut scratch = vec![0.0; n];
            let mut ax = vec![0.0; n];
            smooth_into(&x, h, w, &taps, &mut scratch, &mut ax);
            let mut aty = vec![0.0; n];
            smooth_adjoint(&y, h, w, &taps, &mut scratch, &mut aty);
            prop_assert!((dot(&ax, &y) - dot(&x, &aty)).abs() < 1e-10);

            let (ph, pw) = pooled_dims(h, w, k);
            let yp = random_vec(ph * pw, seed + 2);
            let mut ax = vec![0.0; ph * pw];
            pool_into(&x, h, w, k, &mut ax);
            let mut aty = vec![0.0; n];
            pool_adjoint(&yp, h, w, k, &mut aty);
            prop_assert!((dot(&ax, &yp) - dot(&x, &aty)).abs() < 1e-10);
        }

        #[test]
        fn gradient_and_divergence_are_linear(seed in 0u64..500, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let g = Geometry::new(7, 9, 2.5, (0.0, 0.0)).unwrap();
            let f1 = RasterGrid::new(g, random_vec(63, seed)).unwrap();
            let f2 = RasterGrid::new(g, random_vec(63, seed + 7)).unwrap();
            let comb = f1.zip_map(&f2, |u, v| a * u + b * v).unwrap();
            let g1 = gradient(&f1).unwrap();
            let g2 = gradient(&f2).unwrap();
            let gc = gradient(&comb).unwrap();
            for i in 0..63 {
                prop_assert!((gc.x.values()[i] - (a * g1.x.values()[i] + b * g2.x.values()[i])).abs() < 1e-12);
                prop_assert!((gc.y.values()[i] - (a * g1.y.values()[i] + b * g2.y.values()[i])).abs() < 1e-12);
            }
            let d1 = divergence(&g1).unwrap();
            let d2 = divergence(&g2).unwrap();
            let dc = divergence(&gc).unwrap();
            for i in 0..63 {
                prop_assert!((dc.values()[i] - (a * d1.values()[i] + b * d2.values()[i])).abs() < 1e-11);
            }
        }
    }
}
