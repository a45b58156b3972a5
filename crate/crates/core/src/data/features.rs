use serde::{Deserialize, Serialize};

use super::Scene;
use crate::error::{Error, Result};
use crate::grid::{fourier_coords, gradient, Mask, RasterGrid};

/// Base channels, in stack order. Fourier channels follow.
pub const CHANNEL_NAMES: [&str; 8] = ["s", "vx", "vy", "smb", "dhdt", "dsdx", "dsdy", "h_p"];

/// Index pairs of vector channels inside the base stack.
const VECTOR_PAIRS: [(usize, usize); 2] = [(1, 2), (5, 6)];

/// Offset and scale for each base channel.
///
/// Scalars are centred and divided by their standard deviation. Vector pairs
/// share one RMS scale and are not centred, so a rotation of the inputs is
/// still a rotation of the standardised channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelNorm {
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

fn raw_channels(scene: &Scene) -> Result<Vec<RasterGrid>> {
    let ds = gradient(scene.surface())?;
    Ok(vec![
        scene.surface().clone(),
        scene.velocity().x.clone(),
        scene.velocity().y.clone(),
        scene.smb().clone(),
        scene.dhdt().clone(),
        ds.x,
        ds.y,
        scene.prior_thickness().clone(),
    ])
}

impl ChannelNorm {
    /// Statistics over valid cells of `region`.
    pub fn fit(scene: &Scene, region: &Mask) -> Result<Self> {
        let cells: Vec<usize> = region.and(scene.valid())?.indices().collect();
        if cells.is_empty() {
            return Err(Error::InsufficientData("no valid cells to standardise features over".into()));
        }
        let n = cells.len() as f64;
        let raw = raw_channels(scene)?;
        let mut offset = vec![0.0; raw.len()];
        let mut scale = vec![1.0; raw.len()];
        // Spreads at round-off level relative to the values count as zero.
        let guard = |name: &str, s: f64, magnitude: f64| {
            if s > 1e-12 * magnitude && s.is_finite() {
                s
            } else {
                log::warn!("channel {name} has zero spread over the training region; using scale 1");
                1.0
            }
        };
        for (c, grid) in raw.iter().enumerate() {
            if VECTOR_PAIRS.iter().any(|&(a, b)| a == c || b == c) {
                continue;
            }
            let v = grid.values();
            let mean = cells.iter().map(|&i| v[i]).sum::<f64>() / n;
            let var = cells.iter().map(|&i| (v[i] - mean).powi(2)).sum::<f64>() / n;
            offset[c] = mean;
            scale[c] = guard(CHANNEL_NAMES[c], var.sqrt(), mean.abs().max(f64::MIN_POSITIVE));
        }
        for (a, b) in VECTOR_PAIRS {
            let (va, vb) = (raw[a].values(), raw[b].values());
            let ms = cells.iter().map(|&i| va[i] * va[i] + vb[i] * vb[i]).sum::<f64>() / (2.0 * n);
            let s = guard(CHANNEL_NAMES[a], ms.sqrt(), f64::MIN_POSITIVE);
            scale[a] = s;
            scale[b] = s;
        }
        Ok(Self { offset, scale })
    }
}

/// Standardised input channels and their layout.
#[derive(Debug, Clone)]
pub struct FeatureStack {
    pub channels: Vec<RasterGrid>,
    pub names: Vec<String>,
    /// `(x, y)` index pairs that rotate as vectors.
    pub vector_pairs: Vec<(usize, usize)>,
}

/// Builds the channel stack: the eight base channels standardised with
/// `norm`, then `4 * bands` Fourier coordinate channels (none when `bands` is 0).
pub fn build_feature_stack(scene: &Scene, norm: &ChannelNorm, bands: usize) -> Result<FeatureStack> {
    let raw = raw_channels(scene)?;
    if norm.offset.len() != raw.len() || norm.scale.len() != raw.len() {
        return Err(crate::error::dim("channel norm does not match the feature stack"));
    }
    let mut channels: Vec<RasterGrid> = raw
        .iter()
        .enumerate()
        .map(|(c, g)| g.map(|v| (v - norm.offset[c]) / norm.scale[c]))
        .collect();
    let mut names: Vec<String> = CHANNEL_NAMES.iter().map(|s| s.to_string()).collect();
    if bands > 0 {
        channels.extend(fourier_coords(*scene.geometry(), bands)?);
        for l in 0..bands {
            for suffix in ["sin_x", "cos_x", "sin_y", "cos_y"] {
                names.push(format!("fourier{l}_{suffix}"));
            }
        }
    }
    Ok(FeatureStack { channels, names, vector_pairs: VECTOR_PAIRS.to_vec() })
}
