use std::f64::consts::PI;

use super::{Geometry, RasterGrid};
use crate::error::{param, Result};

/// Sinusoidal coordinate encodings on axes normalized to `[-1, 1]`.
///
/// Channel order: for each band `l`, `sin(2^l pi x~), cos(2^l pi x~),
/// sin(2^l pi y~), cos(2^l pi y~)`, giving `4 * bands` grids.
pub fn fourier_coords(geom: Geometry, bands: usize) -> Result<Vec<RasterGrid>> {
    if bands == 0 {
        return Err(param("fourier encoding needs at least one band"));
    }
    let norm = |i: usize, n: usize| -1.0 + 2.0 * i as f64 / (n - 1) as f64;
    let mut out = Vec::with_capacity(4 * bands);
    for l in 0..bands {
        let freq = (1u64 << l) as f64 * PI;
        out.push(RasterGrid::from_index_fn(geom, |_, c| (freq * norm(c, geom.width)).sin()));
        out.push(RasterGrid::from_index_fn(geom, |_, c| (freq * norm(c, geom.width)).cos()));
        out.push(RasterGrid::from_index_fn(geom, |r, _| (freq * norm(r, geom.height)).sin()));
        out.push(RasterGrid::from_index_fn(geom, |r, _| (freq * norm(r, geom.height)).cos()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_count_and_values() {
        let g = Geometry::unit(5, 7).unwrap();
        let ch = fourier_coords(g, 3).unwrap();
        assert_eq!(ch.len(), 12);
        // Column 3 of 7 and row 2 of 5 sit at normalized coordinate 0.
        for l in 0..3 {
            assert!(ch[4 * l].get(0, 3).abs() < 1e-15);
            assert_eq!(ch[4 * l + 1].get(0, 3), 1.0);
            assert!(ch[4 * l + 2].get(2, 0).abs() < 1e-15);
            assert_eq!(ch[4 * l + 3].get(2, 0), 1.0);
        }
        // x~ = 1 at the last column.
        assert!(ch[0].get(0, 6).abs() < 1e-12);
        assert!((ch[1].get(0, 6) + 1.0).abs() < 1e-12);
        assert!(fourier_coords(g, 0).is_err());
    }
}
