use serde::{Deserialize, Serialize};

use crate::grid::{Geometry, Mask};

/// One radar bed pick in map coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pick {
    pub x: f64,
    pub y: f64,
    pub bed: f64,
}

/// Radar picks that all lie inside a grid extent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RadarPicks {
    records: Vec<Pick>,
}

/// Result of clipping raw picks to a grid.
#[derive(Debug, Clone)]
pub struct PickIngest {
    pub picks: RadarPicks,
    /// Picks outside the extent or with non-finite fields.
    pub dropped: usize,
}

impl RadarPicks {
    /// Keeps picks inside `geom` with finite coordinates and values.
    pub fn ingest(raw: impl IntoIterator<Item = Pick>, geom: &Geometry) -> PickIngest {
        let mut records = Vec::new();
        let mut dropped = 0;
        for p in raw {
            if p.x.is_finite() && p.y.is_finite() && p.bed.is_finite() && geom.contains(p.x, p.y) {
                records.push(p);
            } else {
                dropped += 1;
            }
        }
        if dropped > 0 {
            log::warn!("dropped {dropped} radar picks outside the grid extent");
        }
        PickIngest { picks: Self { records }, dropped }
    }

    pub fn records(&self) -> &[Pick] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records sorted by `(x, y, bed)`, so downstream sums do not depend on
    /// input order.
    pub fn canonical(&self) -> Vec<Pick> {
        let mut v = self.records.clone();
        v.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)).then(a.bed.total_cmp(&b.bed)));
        v
    }

    /// Picks whose containing cell is set in `mask`.
    pub fn within(&self, mask: &Mask) -> Self {
        let g = mask.geometry();
        let records = self
            .records
            .iter()
            .filter(|p| g.cell_of(p.x, p.y).is_some_and(|(r, c)| mask.get(r, c)))
            .copied()
            .collect();
        Self { records }
    }
}
