//! Raster containers and the stencil operators the rest of the crate composes.
//!
//! Rows index the y axis (row 0 is the southernmost row) and columns index
//! the x axis, so `values[row * width + col]` holds the cell whose centre is at
//! `(x0 + (col + 0.5) * spacing, y0 + (row + 0.5) * spacing)`.

mod dihedral;
mod distance;
mod fourier;
pub(crate) mod stencil;

pub use dihedral::{dihedral_apply, DihedralElement};
pub use distance::distance_transform;
pub use fourier::fourier_coords;
pub use stencil::{avg_pool, divergence, gaussian_smooth, gradient, laplacian};

use serde::{Deserialize, Serialize};

use crate::error::{dim, param, Result};

/// Shape, spacing and placement of a raster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub height: usize,
    pub width: usize,
    /// Cell size in meters.
    pub spacing: f64,
    /// Lower-left corner `(x0, y0)` in meters.
    pub origin: (f64, f64),
}

impl Geometry {
    pub fn new(height: usize, width: usize, spacing: f64, origin: (f64, f64)) -> Result<Self> {
        if height < 3 || width < 3 {
            return Err(dim(format!("grid must be at least 3x3, got {height}x{width}")));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(param(format!("spacing must be positive, got {spacing}")));
        }
        Ok(Self { height, width, spacing, origin })
    }

    /// Unit-spaced geometry anchored at the origin.
    pub fn unit(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, 1.0, (0.0, 0.0))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.height && col < self.width);
        row * self.width + col
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin.0 + (col as f64 + 0.5) * self.spacing,
            self.origin.1 + (row as f64 + 0.5) * self.spacing,
        )
    }

    /// Cell containing the point, or `None` outside the extent.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fx = (x - self.origin.0) / self.spacing;
        let fy = (y - self.origin.1) / self.spacing;
        if !(fx >= 0.0 && fy >= 0.0) {
            return None;
        }
        let (col, row) = (fx.floor() as usize, fy.floor() as usize);
        // The far edges belong to the last cell.
        let col = if fx == self.width as f64 { self.width - 1 } else { col };
        let row = if fy == self.height as f64 { self.height - 1 } else { row };
        (row < self.height && col < self.width).then_some((row, col))
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.cell_of(x, y).is_some()
    }

    /// Sub-grid geometry for the window starting at `(row, col)`.
    pub fn window(&self, row: usize, col: usize, height: usize, width: usize) -> Result<Self> {
        if row + height > self.height || col + width > self.width {
            return Err(dim("window exceeds grid extent"));
        }
        Geometry::new(
            height,
            width,
            self.spacing,
            (
                self.origin.0 + col as f64 * self.spacing,
                self.origin.1 + row as f64 * self.spacing,
            ),
        )
    }

    pub fn same_shape(&self, other: &Geometry) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn same_as(&self, other: &Geometry) -> bool {
        self.same_shape(other) && self.spacing == other.spacing && self.origin == other.origin
    }
}

/// H×W scalar field on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    geom: Geometry,
    values: Vec<f64>,
    nodata: Option<f64>,
}

impl RasterGrid {
    pub fn new(geom: Geometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geom.len() {
            return Err(dim(format!(
                "expected {} values for a {}x{} grid, got {}",
                geom.len(),
                geom.height,
                geom.width,
                values.len()
            )));
        }
        Ok(Self { geom, values, nodata: None })
    }

    pub fn filled(geom: Geometry, value: f64) -> Self {
        Self { geom, values: vec![value; geom.len()], nodata: None }
    }

    pub fn zeros(geom: Geometry) -> Self {
        Self::filled(geom, 0.0)
    }

    /// Builds a grid by evaluating `f(x, y)` at every cell centre.
    pub fn from_fn(geom: Geometry, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(geom.len());
        for row in 0..geom.height {
            for col in 0..geom.width {
                let (x, y) = geom.cell_center(row, col);
                values.push(f(x, y));
            }
        }
        Self { geom, values, nodata: None }
    }

    /// Builds a grid from a function of `(row, col)`.
    pub fn from_index_fn(geom: Geometry, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(geom.len());
        for row in 0..geom.height {
            for col in 0..geom.width {
                values.push(f(row, col));
            }
        }
        Self { geom, values, nodata: None }
    }

    pub fn with_nodata(mut self, nodata: Option<f64>) -> Self {
        self.nodata = nodata;
        self
    }

    #[inline]
    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.geom.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.geom.width
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.geom.spacing
    }

    pub fn nodata(&self) -> Option<f64> {
        self.nodata
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[self.geom.idx(row, col)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let i = self.geom.idx(row, col);
        self.values[i] = value;
    }

    /// Cells that are finite and differ from the nodata sentinel.
    pub fn valid_mask(&self) -> Mask {
        let cells = self
            .values
            .iter()
            .map(|&v| v.is_finite() && Some(v) != self.nodata)
            .collect();
        Mask { geom: self.geom, cells }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { geom: self.geom, values: self.values.iter().map(|&v| f(v)).collect(), nodata: self.nodata }
    }

    pub fn zip_map(&self, other: &RasterGrid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_shape(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { geom: self.geom, values, nodata: None })
    }

    pub fn check_same_shape(&self, other: &RasterGrid) -> Result<()> {
        if self.geom.same_shape(&other.geom) {
            Ok(())
        } else {
            Err(dim(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.geom.height, self.geom.width, other.geom.height, other.geom.width
            )))
        }
    }

    /// Copies the window starting at `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Result<Self> {
        let geom = self.geom.window(row, col, height, width)?;
        let mut values = Vec::with_capacity(geom.len());
        for r in row..row + height {
            let start = self.geom.idx(r, col);
            values.extend_from_slice(&self.values[start..start + width]);
        }
        Ok(Self { geom, values, nodata: self.nodata })
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Two-component field sharing one geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub x: RasterGrid,
    pub y: RasterGrid,
}

impl VectorField {
    pub fn new(x: RasterGrid, y: RasterGrid) -> Result<Self> {
        if !x.geometry().same_as(y.geometry()) {
            return Err(dim("vector components must share geometry"));
        }
        Ok(Self { x, y })
    }

    pub fn geometry(&self) -> &Geometry {
        self.x.geometry()
    }

    pub fn magnitude(&self) -> RasterGrid {
        let values = self.x.values().iter().zip(self.y.values()).map(|(a, b)| a.hypot(*b)).collect();
        RasterGrid { geom: *self.geometry(), values, nodata: None }
    }

    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Result<Self> {
        Ok(Self { x: self.x.crop(row, col, height, width)?, y: self.y.crop(row, col, height, width)? })
    }
}

/// Binary raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    geom: Geometry,
    cells: Vec<bool>,
}

impl Mask {
    pub fn new(geom: Geometry, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != geom.len() {
            return Err(dim(format!("expected {} mask cells, got {}", geom.len(), cells.len())));
        }
        Ok(Self { geom, cells })
    }

    pub fn filled(geom: Geometry, value: bool) -> Self {
        Self { geom, cells: vec![value; geom.len()] }
    }

    pub fn from_index_fn(geom: Geometry, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut cells = Vec::with_capacity(geom.len());
        for row in 0..geom.height {
            for col in 0..geom.width {
                cells.push(f(row, col));
            }
        }
        Self { geom, cells }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    #[inline]
    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[self.geom.idx(row, col)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        let i = self.geom.idx(row, col);
        self.cells[i] = value;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn any(&self) -> bool {
        self.cells.iter().any(|&c| c)
    }

    pub fn and(&self, other: &Mask) -> Result<Mask> {
        if !self.geom.same_shape(&other.geom) {
            return Err(dim("mask shape mismatch"));
        }
        let cells = self.cells.iter().zip(&other.cells).map(|(a, b)| *a && *b).collect();
        Ok(Mask { geom: self.geom, cells })
    }

    pub fn not(&self) -> Mask {
        Mask { geom: self.geom, cells: self.cells.iter().map(|c| !c).collect() }
    }

    pub fn to_grid(&self) -> RasterGrid {
        RasterGrid {
            geom: self.geom,
            values: self.cells.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect(),
            nodata: None,
        }
    }

    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Result<Self> {
        let geom = self.geom.window(row, col, height, width)?;
        let mut cells = Vec::with_capacity(geom.len());
        for r in row..row + height {
            let start = self.geom.idx(r, col);
            cells.extend_from_slice(&self.cells[start..start + width]);
        }
        Ok(Self { geom, cells })
    }

    /// Indices of set cells in row-major order.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.cells.iter().enumerate().filter_map(|(i, &c)| c.then_some(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_tiny_and_bad_spacing() {
        assert!(matches!(Geometry::unit(2, 5), Err(crate::Error::Dimension(_))));
        assert!(matches!(Geometry::new(3, 3, 0.0, (0.0, 0.0)), Err(crate::Error::Parameter(_))));
        let g = Geometry::unit(3, 4).unwrap();
        assert!(RasterGrid::new(g, vec![0.0; 11]).is_err());
    }

    #[test]
    fn cell_lookup_round_trips() {
        let g = Geometry::new(4, 5, 10.0, (100.0, 200.0)).unwrap();
        for row in 0..4 {
            for col in 0..5 {
                let (x, y) = g.cell_center(row, col);
                assert_eq!(g.cell_of(x, y), Some((row, col)));
            }
        }
        assert_eq!(g.cell_of(99.9, 205.0), None);
        assert_eq!(g.cell_of(150.0, 240.0), Some((3, 4)));
        assert_eq!(g.cell_of(150.1, 240.0), None);
    }

    #[test]
    fn crop_keeps_placement() {
        let g = Geometry::new(5, 6, 2.0, (0.0, 0.0)).unwrap();
        let f = RasterGrid::from_index_fn(g, |r, c| (r * 10 + c) as f64);
        let w = f.crop(1, 2, 3, 3).unwrap();
        assert_eq!(w.get(0, 0), 12.0);
        assert_eq!(w.get(2, 2), 34.0);
        assert_eq!(w.geometry().origin, (4.0, 2.0));
    }

    #[test]
    fn nodata_cells_are_invalid() {
        let g = Geometry::unit(3, 3).unwrap();
        let mut f = RasterGrid::zeros(g).with_nodata(Some(-9999.0));
        f.set(1, 1, -9999.0);
        f.set(0, 0, f64::NAN);
        let m = f.valid_mask();
        assert_eq!(m.count(), 7);
        assert!(!m.get(1, 1));
    }
}
