//! The eight rotations and reflections of a square grid.
//!
//! An element is `R^k . F^f`: an optional mirror of the x axis followed by `k`
//! counter-clockwise quarter turns. Vector channels are moved to their new cell
//! and multiplied by the element's signed permutation matrix, so the mixing is
//! exact in floating point.

use serde::{Deserialize, Serialize};

use super::{Geometry, Mask, RasterGrid};
use crate::error::{dim, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct DihedralElement {
    /// Counter-clockwise quarter turns, `0..4`.
    pub quarter_turns: u8,
    /// Mirror `x -> -x` before rotating.
    pub flip: bool,
}

type Mat = [[i64; 2]; 2];

fn mat_mul(a: Mat, b: Mat) -> Mat {
    let mut out = [[0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

impl DihedralElement {
    pub const IDENTITY: Self = Self { quarter_turns: 0, flip: false };

    pub fn new(quarter_turns: u8, flip: bool) -> Self {
        Self { quarter_turns: quarter_turns % 4, flip }
    }

    /// All eight elements, identity first.
    pub fn all() -> [Self; 8] {
        let mut out = [Self::IDENTITY; 8];
        for (i, e) in out.iter_mut().enumerate() {
            *e = Self::new((i % 4) as u8, i >= 4);
        }
        out
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    /// Whether the element swaps the two axes.
    pub fn transposes(&self) -> bool {
        self.quarter_turns % 2 == 1
    }

    /// Signed permutation matrix acting on `(x, y)`.
    pub fn matrix(&self) -> Mat {
        let rot: Mat = [[0, -1], [1, 0]];
        let mut m: Mat = if self.flip { [[-1, 0], [0, 1]] } else { [[1, 0], [0, 1]] };
        for _ in 0..self.quarter_turns {
            m = mat_mul(rot, m);
        }
        m
    }

    fn from_matrix(m: Mat) -> Self {
        Self::all().into_iter().find(|e| e.matrix() == m).expect("D4 is closed under products")
    }

    /// `self . other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self::from_matrix(mat_mul(self.matrix(), other.matrix()))
    }

    pub fn inverse(&self) -> Self {
        let m = self.matrix();
        Self::from_matrix([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    /// Rotates a single vector.
    pub fn apply_vector(&self, v: (f64, f64)) -> (f64, f64) {
        let m = self.matrix();
        (mix(m[0], v), mix(m[1], v))
    }

    fn check_shape(&self, g: &Geometry) -> Result<()> {
        if self.transposes() && g.height != g.width {
            return Err(dim(format!("quarter turns need a square grid, got {}x{}", g.height, g.width)));
        }
        Ok(())
    }

    /// Destination index for every source index.
    fn destinations(&self, g: &Geometry) -> Vec<usize> {
        let m = self.matrix();
        let (h, w) = (g.height as i64, g.width as i64);
        let mut out = Vec::with_capacity(g.len());
        for row in 0..h {
            for col in 0..w {
                // Doubled, centred coordinates keep the arithmetic integral.
                let x = 2 * col - (w - 1);
                let y = 2 * row - (h - 1);
                let xn = m[0][0] * x + m[0][1] * y;
                let yn = m[1][0] * x + m[1][1] * y;
                let (cn, rn) = ((xn + w - 1) / 2, (yn + h - 1) / 2);
                out.push((rn * w + cn) as usize);
            }
        }
        out
    }

    pub fn apply_grid(&self, f: &RasterGrid) -> Result<RasterGrid> {
        self.check_shape(f.geometry())?;
        if self.is_identity() {
            return Ok(f.clone());
        }
        let dest = self.destinations(f.geometry());
        let mut out = vec![0.0; dest.len()];
        for (src, &d) in dest.iter().enumerate() {
            out[d] = f.values()[src];
        }
        Ok(RasterGrid::new(*f.geometry(), out)?.with_nodata(f.nodata()))
    }

    pub fn apply_mask(&self, m: &Mask) -> Result<Mask> {
        self.check_shape(m.geometry())?;
        let dest = self.destinations(m.geometry());
        let mut out = vec![false; dest.len()];
        for (src, &d) in dest.iter().enumerate() {
            out[d] = m.cells()[src];
        }
        Mask::new(*m.geometry(), out)
    }

    /// Moves and mixes a vector pair.
    pub fn apply_pair(&self, vx: &RasterGrid, vy: &RasterGrid) -> Result<(RasterGrid, RasterGrid)> {
        vx.check_same_shape(vy)?;
        self.check_shape(vx.geometry())?;
        let m = self.matrix();
        let dest = self.destinations(vx.geometry());
        let mut ox = vec![0.0; dest.len()];
        let mut oy = vec![0.0; dest.len()];
        for (src, &d) in dest.iter().enumerate() {
            let v = (vx.values()[src], vy.values()[src]);
            ox[d] = mix(m[0], v);
            oy[d] = mix(m[1], v);
        }
        Ok((RasterGrid::new(*vx.geometry(), ox)?, RasterGrid::new(*vy.geometry(), oy)?))
    }
}

/// Row of a signed permutation matrix applied to a vector; only selects and
/// negates, never rounds.
#[inline]
fn mix(row: [i64; 2], v: (f64, f64)) -> f64 {
    match row {
        [1, 0] => v.0,
        [-1, 0] => -v.0,
        [0, 1] => v.1,
        [0, -1] => -v.1,
        _ => unreachable!("not a signed permutation"),
    }
}

/// Applies `g` to a channel stack. `vector_channels` lists `(x, y)` index pairs;
/// every other channel is treated as a scalar.
pub fn dihedral_apply(
    stack: &[RasterGrid],
    vector_channels: &[(usize, usize)],
    g: DihedralElement,
) -> Result<Vec<RasterGrid>> {
    let mut out: Vec<Option<RasterGrid>> = vec![None; stack.len()];
    for &(ix, iy) in vector_channels {
        if ix >= stack.len() || iy >= stack.len() || ix == iy {
            return Err(dim(format!("invalid vector channel pair ({ix}, {iy})")));
        }
        let (x, y) = g.apply_pair(&stack[ix], &stack[iy])?;
        out[ix] = Some(x);
        out[iy] = Some(y);
    }
    stack
        .iter()
        .zip(out)
        .map(|(f, done)| match done {
            Some(v) => Ok(v),
            None => g.apply_grid(f),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn random_grid(n: usize, seed: u64) -> RasterGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Geometry::unit(n, n).unwrap();
        RasterGrid::new(g, (0..n * n).map(|_| rng.random_range(-5.0..5.0)).collect()).unwrap()
    }

    #[test]
    fn group_axioms() {
        let all = DihedralElement::all();
        let set: HashSet<_> = all.iter().map(|e| e.matrix()).collect();
        assert_eq!(set.len(), 8);
        for a in all {
            assert!(a.compose(&a.inverse()).is_identity());
            for b in all {
                assert!(all.contains(&a.compose(&b)));
            }
        }
        let r = DihedralElement::new(1, false);
        assert_eq!(r.compose(&r).compose(&r).compose(&r), DihedralElement::IDENTITY);
    }

    #[test]
    fn quarter_turn_rotates_unit_x_to_unit_y() {
        let g = Geometry::unit(5, 5).unwrap();
        let mut vx = RasterGrid::zeros(g);
        let vy = RasterGrid::zeros(g);
        vx.set(1, 3, 1.0);
        let r = DihedralElement::new(1, false);
        let (ox, oy) = r.apply_pair(&vx, &vy).unwrap();
        // (col 3, row 1) -> centred (1, -1) -> rotated (1, 1) -> (col 3, row 3)
        assert_eq!(oy.get(3, 3), 1.0);
        assert_eq!(ox.get(3, 3), 0.0);
        assert_eq!(oy.values().iter().filter(|&&v| v != 0.0).count(), 1);
        assert_eq!(r.apply_vector((1.0, 0.0)), (0.0, 1.0));
    }

    #[test]
    fn flip_negates_x_component() {
        let f = DihedralElement::new(0, true);
        assert_eq!(f.apply_vector((2.0, 3.0)), (-2.0, 3.0));
        let g = random_grid(4, 1);
        let out = f.apply_grid(&g).unwrap();
        assert_eq!(out.get(2, 0), g.get(2, 3));
    }

    #[test]
    fn apply_then_inverse_is_bit_identical() {
        let stack = vec![random_grid(7, 1), random_grid(7, 2), random_grid(7, 3), random_grid(7, 4)];
        let pairs = [(1, 2)];
        for g in DihedralElement::all() {
            let t = dihedral_apply(&stack, &pairs, g).unwrap();
            let back = dihedral_apply(&t, &pairs, g.inverse()).unwrap();
            assert_eq!(back, stack);
        }
    }

    #[test]
    fn application_follows_group_law() {
        let stack = vec![random_grid(6, 5), random_grid(6, 6), random_grid(6, 7)];
        let pairs = [(0, 2)];
        for a in DihedralElement::all() {
            for b in DihedralElement::all() {
                let two_step = dihedral_apply(&dihedral_apply(&stack, &pairs, b).unwrap(), &pairs, a).unwrap();
                let one_step = dihedral_apply(&stack, &pairs, a.compose(&b)).unwrap();
                assert_eq!(two_step, one_step);
            }
        }
    }

    #[test]
    fn quarter_turn_needs_square() {
        let g = Geometry::unit(4, 6).unwrap();
        let f = RasterGrid::zeros(g);
        assert!(matches!(DihedralElement::new(1, false).apply_grid(&f), Err(crate::Error::Dimension(_))));
        assert!(DihedralElement::new(2, true).apply_grid(&f).is_ok());
    }
}
