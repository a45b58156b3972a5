use std::num::NonZero;

use kiddo::{ImmutableKdTree, SquaredEuclidean};
use rayon::prelude::*;

use crate::data::{Pick, RadarPicks};
use crate::error::{param, Error, Result};
use crate::grid::{Geometry, RasterGrid};

/// k-d tree over picks in canonical order, so neighbour ties resolve the same
/// way whatever order the picks arrived in.
pub(crate) struct PickIndex {
    pub picks: Vec<Pick>,
    tree: ImmutableKdTree<f64, 2>,
}

impl PickIndex {
    pub fn new(picks: &RadarPicks) -> Result<Self> {
        if picks.is_empty() {
            return Err(Error::EmptyObservations("no radar picks to interpolate".into()));
        }
        let picks = picks.canonical();
        let pts: Vec<[f64; 2]> = picks.iter().map(|p| [p.x, p.y]).collect();
        Ok(Self { tree: ImmutableKdTree::new_from_slice(&pts), picks })
    }

    /// Up to `k` nearest picks as `(distance, index)`, nearest first, ties by
    /// index.
    pub fn nearest(&self, x: f64, y: f64, k: usize) -> Vec<(f64, usize)> {
        let k = NonZero::new(k.min(self.picks.len()).max(1)).unwrap();
        let mut out: Vec<(f64, usize)> = self
            .tree
            .nearest_n::<SquaredEuclidean>(&[x, y], k)
            .into_iter()
            .map(|n| (n.distance.sqrt(), n.item as usize))
            .collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out
    }
}

/// Inverse-distance weighting over the `k` nearest picks with weights
/// `d^-p`. A pick within half a cell of a cell centre is copied verbatim.
pub fn idw_interpolate(picks: &RadarPicks, geom: &Geometry, k: usize, power: f64) -> Result<RasterGrid> {
    if k == 0 || !(power > 0.0) {
        return Err(param("IDW needs k >= 1 and a positive power"));
    }
    let index = PickIndex::new(picks)?;
    let mut vals = vec![0.0; geom.len()];
    vals.par_chunks_mut(geom.width).enumerate().for_each(|(r, row)| {
        for (c, v) in row.iter_mut().enumerate() {
            let (x, y) = geom.cell_center(r, c);
            *v = idw_at(&index, x, y, k, power, 0.5 * geom.spacing);
        }
    });
    RasterGrid::new(*geom, vals)
}

pub(crate) fn idw_at(index: &PickIndex, x: f64, y: f64, k: usize, power: f64, hit_radius: f64) -> f64 {
    let nn = index.nearest(x, y, k);
    if nn[0].0 <= hit_radius || nn.len() == 1 {
        return index.picks[nn[0].1].bed;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for &(d, i) in &nn {
        let w = d.powf(-power);
        num += w * index.picks[i].bed;
        den += w;
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn picks(v: &[(f64, f64, f64)]) -> RadarPicks {
        let g = Geometry::unit(100, 100).unwrap();
        RadarPicks::ingest(v.iter().map(|&(x, y, bed)| Pick { x, y, bed }), &g).picks
    }

    #[test]
    fn exact_hit_and_equidistant_mean() {
        let g = Geometry::unit(5, 5).unwrap();
        let p = picks(&[(2.5, 2.5, 7.0), (0.2, 4.8, -3.0)]);
        let f = idw_interpolate(&p, &g, 2, 2.0).unwrap();
        assert_eq!(f.get(2, 2), 7.0);

        let p = picks(&[(0.5, 2.5, 1.0), (4.5, 2.5, 5.0)]);
        for pw in [0.5, 1.0, 3.0] {
            let f = idw_interpolate(&p, &g, 2, pw).unwrap();
            assert!((f.get(2, 2) - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_picks_rejected() {
        let g = Geometry::unit(5, 5).unwrap();
        assert!(matches!(idw_interpolate(&RadarPicks::default(), &g, 3, 2.0), Err(Error::EmptyObservations(_))));
    }

    #[test]
    fn k1_matches_brute_force_nearest() {
        let g = Geometry::unit(20, 20).unwrap();
        let raw: Vec<(f64, f64, f64)> =
            (0..30).map(|i| (((i * 37) % 97) as f64 * 0.2 + 0.13, ((i * 53) % 89) as f64 * 0.22 + 0.07, i as f64)).collect();
        let p = picks(&raw);
        let f = idw_interpolate(&p, &g, 1, 2.0).unwrap();
        for r in 0..20 {
            for c in 0..20 {
                let (x, y) = g.cell_center(r, c);
                let best = p
                    .records()
                    .iter()
                    .min_by(|a, b| ((a.x - x).hypot(a.y - y)).total_cmp(&(b.x - x).hypot(b.y - y)))
                    .unwrap();
                assert_eq!(f.get(r, c), best.bed);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn bounded_and_order_invariant(
            raw in prop::collection::vec((0.0f64..12.0, 0.0f64..12.0, -50.0f64..50.0), 1..25),
            k in 1usize..8,
        ) {
            let g = Geometry::unit(12, 12).unwrap();
            let p = picks(&raw);
            let f = idw_interpolate(&p, &g, k, 2.0).unwrap();
            let lo = raw.iter().map(|t| t.2).fold(f64::INFINITY, f64::min);
            let hi = raw.iter().map(|t| t.2).fold(f64::NEG_INFINITY, f64::max);
            for &v in f.values() {
                prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
            }
            let mut rev = raw.clone();
            rev.reverse();
            let f2 = idw_interpolate(&picks(&rev), &g, k, 2.0).unwrap();
            prop_assert_eq!(f, f2);
        }
    }
}
