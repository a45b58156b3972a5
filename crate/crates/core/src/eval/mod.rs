//! Leakage-safe block splits and the metric suite, computed on core cells
//! only.

mod metrics;
mod split;

pub use metrics::{
    align_orientation, distance_bin_of, pixel_metrics, psnr, radar_errors, ssim, ssim_with, stratified_rmse, tri,
    tri_diff, Alignment, DistanceBin, PixelMetrics, RadarErrors, SsimParams, DISTANCE_BINS,
};
pub use split::{
    block_split, bounding_box, check_tile_leakage, tiles_for_region, ErosionMode, LeakageReport, Split, SplitAxis,
    SplitSpec,
};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::RadarPicks;
use crate::error::{Error, Result};
use crate::grid::{DihedralElement, Mask, RasterGrid};

/// Serialises `+inf` as the string `"inf"`; other values as numbers.
mod inf_sentinel {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) if *x == f64::INFINITY => s.serialize_str("inf"),
            Some(x) => s.serialize_f64(*x),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Num(x)) => Ok(Some(x)),
            Some(Repr::Text(t)) if t == "inf" => Ok(Some(f64::INFINITY)),
            Some(Repr::Text(t)) => Err(serde::de::Error::custom(format!("unexpected value {t:?}"))),
        }
    }
}

/// Agreement with the reference raster over the test core.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMetrics {
    pub mae: f64,
    pub rmse: f64,
    pub r2: Option<f64>,
    pub ssim: Option<f64>,
    /// `"inf"` for a perfect match.
    #[serde(with = "inf_sentinel")]
    pub psnr: Option<f64>,
    pub tri_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub orientation: DihedralElement,
    pub core_cells: usize,
    pub reference: ReferenceMetrics,
    pub radar: RadarErrors,
    pub stratified: Vec<DistanceBin>,
}

fn optional<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::InsufficientData(m)) | Err(Error::Parameter(m)) => {
            log::warn!("metric skipped: {m}");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Aligns `pred` to `reference` once, then computes every metric on `core`.
/// `picks` are the held-out picks and `d_rad` the distance to the nearest
/// pick in cells.
pub fn evaluate(
    pred: &RasterGrid,
    reference: &RasterGrid,
    core: &Mask,
    picks: &RadarPicks,
    d_rad: &RasterGrid,
) -> Result<MetricsReport> {
    let (align, aligned) = align_orientation(pred, reference, core)?;
    let px = pixel_metrics(&aligned, reference, core)?;
    Ok(MetricsReport {
        orientation: align.element,
        core_cells: px.count,
        reference: ReferenceMetrics {
            mae: px.mae,
            rmse: px.rmse,
            r2: px.r2,
            ssim: optional(ssim(&aligned, reference, core))?,
            psnr: optional(psnr(&aligned, reference, core))?,
            tri_diff: optional(tri_diff(&aligned, reference, core))?,
        },
        radar: radar_errors(&aligned, picks, core)?,
        stratified: stratified_rmse(&aligned, reference, core, d_rad)?,
    })
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) if x == f64::INFINITY => "inf".into(),
        Some(x) => format!("{x:.4}"),
        None => "n/a".into(),
    }
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// Aligned plain-text rendering.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let o = self.orientation;
        let _ = writeln!(s, "orientation  quarter_turns={} flip={}", o.quarter_turns, o.flip);
        let _ = writeln!(s, "core cells   {}", self.core_cells);
        let r = &self.reference;
        let _ = writeln!(s, "\n{:<10}{:>12}{:>12}{:>12}{:>12}{:>12}{:>12}", "row", "mae", "rmse", "r2", "ssim", "psnr", "tri_diff");
        let _ = writeln!(
            s,
            "{:<10}{:>12}{:>12}{:>12}{:>12}{:>12}{:>12}",
            "reference",
            cell(Some(r.mae)),
            cell(Some(r.rmse)),
            cell(r.r2),
            cell(r.ssim),
            cell(r.psnr),
            cell(r.tri_diff)
        );
        let m = self.radar.metrics;
        let _ = writeln!(
            s,
            "{:<10}{:>12}{:>12}{:>12}{:>12}{:>12}{:>12}",
            "radar",
            cell(m.map(|m| m.mae)),
            cell(m.map(|m| m.rmse)),
            cell(m.and_then(|m| m.r2)),
            "",
            "",
            ""
        );
        let _ = writeln!(s, "radar picks in core {}, excluded {}", m.map_or(0, |m| m.count), self.radar.excluded);
        let _ = writeln!(s, "\n{:<14}{:>10}{:>12}", "distance px", "cells", "rmse");
        for b in &self.stratified {
            let label = match b.upper_px {
                Some(hi) if b.lower_px == 0.0 => format!("[{}, {}]", b.lower_px, hi),
                Some(hi) => format!("({}, {}]", b.lower_px, hi),
                None => format!("({}, inf)", b.lower_px),
            };
            let _ = writeln!(s, "{:<14}{:>10}{:>12}", label, b.count, cell(b.rmse));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Pick;
    use crate::grid::{distance_transform, Geometry};

    fn fixture() -> (RasterGrid, Split, RadarPicks, RasterGrid) {
        let g = Geometry::unit(40, 40).unwrap();
        let f = RasterGrid::from_index_fn(g, |r, c| ((r as f64) * 0.4).sin() * 20.0 + (c as f64 * 0.25).cos() * 15.0);
        let split = block_split(&g, &SplitSpec { buffer: 4, ..Default::default() }).unwrap();
        let raw = (0..40).map(|r| Pick { x: 30.5, y: r as f64 + 0.5, bed: f.get(r, 30) });
        let picks = RadarPicks::ingest(raw, &g).picks;
        let mut m = Mask::filled(g, false);
        for r in 0..40 {
            m.set(r, 30, true);
        }
        (f, split, picks, distance_transform(&m).unwrap())
    }

    #[test]
    fn self_evaluation_is_perfect() {
        let (f, split, picks, d) = fixture();
        let rep = evaluate(&f, &f, &split.test_core, &picks, &d).unwrap();
        assert_eq!((rep.reference.mae, rep.reference.rmse, rep.reference.r2), (0.0, 0.0, Some(1.0)));
        assert!((rep.reference.ssim.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(rep.reference.psnr, Some(f64::INFINITY));
        assert_eq!(rep.stratified.len(), 3);
        let json = rep.to_json();
        assert!(json.contains("\"psnr\": \"inf\""));
        let back: MetricsReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rep);
        assert!(rep.to_table().contains("(6, inf)"));
    }

    #[test]
    fn non_core_cells_do_not_matter() {
        let (f, split, picks, d) = fixture();
        let pred = f.map(|v| v + 0.3 * (v * 7.0).sin());
        let a = evaluate(&pred, &f, &split.test_core, &picks, &d).unwrap();
        let mut changed = pred.clone();
        for i in split.train_block.indices() {
            changed.values_mut()[i] += 1000.0;
        }
        let b = evaluate(&changed, &f, &split.test_core, &picks, &d).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }
}
