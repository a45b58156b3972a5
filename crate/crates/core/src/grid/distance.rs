//! Exact Euclidean distance transform (Felzenszwalb & Huttenlocher lower
//! envelope of parabolas, one pass per axis).

use super::{Mask, RasterGrid};
use crate::error::{Error, Result};

/// Squared distance along one line to the nearest zero-cost sample.
fn envelope_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    // Leading infinities carry no parabola; skip them so the envelope stays finite.
    let mut start = 0;
    while start < n && f[start].is_infinite() {
        start += 1;
    }
    if start == n {
        d.iter_mut().for_each(|x| *x = f64::INFINITY);
        return;
    }
    v[0] = start;
    for q in start + 1..n {
        if f[q].is_infinite() {
            continue;
        }
        let qf = q as f64;
        let mut s;
        loop {
            let p = v[k];
            let pf = p as f64;
            s = ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf);
            // z[0] is -inf, so k never underflows.
            if s <= z[k] {
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    let mut k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let p = v[k] as f64;
        *out = (qf - p) * (qf - p) + f[v[k]];
    }
}

/// Distance in cells from every cell to the nearest set cell.
pub fn distance_transform(mask: &Mask) -> Result<RasterGrid> {
    if !mask.any() {
        return Err(Error::EmptyObservations("distance transform needs at least one set cell".into()));
    }
    let g = *mask.geometry();
    let (h, w) = (g.height, g.width);
    let n = h.max(w);
    let mut f = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];

    let mut sq: Vec<f64> = mask.cells().iter().map(|&c| if c { 0.0 } else { f64::INFINITY }).collect();
    for c in 0..w {
        for r in 0..h {
            f[r] = sq[r * w + c];
        }
        envelope_1d(&f[..h], &mut d[..h], &mut v, &mut z);
        for r in 0..h {
            sq[r * w + c] = d[r];
        }
    }
    for r in 0..h {
        f[..w].copy_from_slice(&sq[r * w..(r + 1) * w]);
        envelope_1d(&f[..w], &mut d[..w], &mut v, &mut z);
        sq[r * w..(r + 1) * w].copy_from_slice(&d[..w]);
    }
    RasterGrid::new(g, sq.into_iter().map(f64::sqrt).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Geometry;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(mask: &Mask) -> Vec<f64> {
        let g = mask.geometry();
        let sites: Vec<(usize, usize)> =
            (0..g.height).flat_map(|r| (0..g.width).map(move |c| (r, c))).filter(|&(r, c)| mask.get(r, c)).collect();
        let mut out = Vec::new();
        for r in 0..g.height {
            for c in 0..g.width {
                let best = sites
                    .iter()
                    .map(|&(sr, sc)| {
                        let dr = r as f64 - sr as f64;
                        let dc = c as f64 - sc as f64;
                        dr * dr + dc * dc
                    })
                    .fold(f64::INFINITY, f64::min);
                out.push(best.sqrt());
            }
        }
        out
    }

    #[test]
    fn three_four_five() {
        let g = Geometry::unit(6, 6).unwrap();
        let mut m = Mask::filled(g, false);
        m.set(0, 0, true);
        let d = distance_transform(&m).unwrap();
        assert_eq!(d.get(0, 0), 0.0);
        assert_eq!(d.get(4, 3), 5.0);
    }

    #[test]
    fn empty_mask_is_an_error() {
        let g = Geometry::unit(4, 4).unwrap();
        assert!(matches!(distance_transform(&Mask::filled(g, false)), Err(Error::EmptyObservations(_))));
    }

    #[test]
    fn matches_brute_force_on_random_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..40 {
            let h = rng.random_range(3..=64);
            let w = rng.random_range(3..=64);
            let density = [0.002, 0.02, 0.1, 0.5][trial % 4];
            let g = Geometry::unit(h, w).unwrap();
            let mut m = Mask::from_index_fn(g, |_, _| rng.random_bool(density));
            if !m.any() {
                m.set(rng.random_range(0..h), rng.random_range(0..w), true);
            }
            let d = distance_transform(&m).unwrap();
            assert_eq!(d.values(), brute(&m).as_slice(), "trial {trial}");
        }
    }
}
