//! Browser demo: generate a synthetic scene, reconstruct its bed and compare
//! against the classical baselines, all on the page's own thread.

use bedrecon::baselines::{run_idw, run_kriging, BaselineConfig};
use bedrecon::data::{synth_scene, LineOrientation, PickPattern, SynthParams, SynthScene};
use bedrecon::eval::{block_split, pixel_metrics, Split, SplitSpec};
use bedrecon::grid::RasterGrid;
use bedrecon::pipeline::{run_reconstruction, ReconOptions};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Score {
    pub test_rmse: f64,
    pub prior_test_rmse: f64,
    pub train_rmse: f64,
}

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    scene: SynthScene,
    split: Split,
    buffer: usize,
    bed: Option<RasterGrid>,
}

impl Demo {
    pub fn create(size: usize, seed: u64, bias: f64, lines: usize) -> bedrecon::Result<Self> {
        let p = SynthParams {
            height: size,
            width: size,
            bias_amplitude: bias,
            flux_stretch_y: 0.0,
            picks: PickPattern::Lines { count: lines.max(1), orientation: LineOrientation::Across, spacing_px: 1 },
            ..Default::default()
        };
        let scene = synth_scene(seed, &p)?;
        let buffer = (size / 6).max(1);
        let split = block_split(scene.scene.geometry(), &SplitSpec { buffer, ..Default::default() })?;
        Ok(Self { scene, split, buffer, bed: None })
    }

    fn score(&self, bed: &RasterGrid) -> bedrecon::Result<Score> {
        let truth = &self.scene.true_bed;
        let prior = self.scene.scene.prior_bed();
        Ok(Score {
            test_rmse: pixel_metrics(bed, truth, &self.split.test_core)?.rmse,
            prior_test_rmse: pixel_metrics(prior, truth, &self.split.test_core)?.rmse,
            train_rmse: pixel_metrics(bed, truth, &self.split.train_core)?.rmse,
        })
    }

    pub fn solve(&mut self, epochs: usize, lambda_phys: f64, lambda_prior: f64) -> bedrecon::Result<Score> {
        let mut opts = ReconOptions { split: SplitSpec { buffer: self.buffer, ..Default::default() }, ..Default::default() };
        opts.settings.solver.epochs = epochs.max(1);
        opts.settings.loss.lambda_phys = lambda_phys;
        opts.settings.loss.lambda_prior = lambda_prior;
        let out = run_reconstruction(&self.scene.scene, &self.scene.picks, &opts)?;
        let score = self.score(&out.bed)?;
        self.bed = Some(out.bed);
        Ok(score)
    }

    pub fn solve_baseline(&mut self, kind: &str) -> bedrecon::Result<Score> {
        let cfg = BaselineConfig::default();
        let (s, core) = (&self.scene, &self.split.train_core);
        let bed = match kind {
            "idw" => run_idw(&s.picks, &s.scene, core, &cfg)?,
            _ => run_kriging(&s.picks, &s.scene, core, &cfg)?.bed,
        };
        let score = self.score(&bed)?;
        self.bed = Some(bed);
        Ok(score)
    }
}

#[wasm_bindgen]
impl Demo {
    /// Square synthetic scene with `lines` flight lines across the flow.
    #[wasm_bindgen(constructor)]
    pub fn new(size: usize, seed: u64, bias: f64, lines: usize) -> Result<Demo, JsError> {
        Self::create(size, seed, bias, lines).map_err(js_err)
    }

    pub fn size(&self) -> usize {
        self.scene.true_bed.width()
    }

    pub fn truth(&self) -> Vec<f64> {
        self.scene.true_bed.values().to_vec()
    }

    pub fn prior(&self) -> Vec<f64> {
        self.scene.scene.prior_bed().values().to_vec()
    }

    /// Last reconstructed bed, empty before any solve.
    pub fn bed(&self) -> Vec<f64> {
        self.bed.as_ref().map(|b| b.values().to_vec()).unwrap_or_default()
    }

    /// 1 for pick cells, 2 for train core, 3 for test core, 0 elsewhere.
    pub fn layout(&self) -> Vec<u8> {
        let g = *self.scene.true_bed.geometry();
        let mut out: Vec<u8> = (0..g.len())
            .map(|i| {
                if self.split.train_core.cells()[i] {
                    2
                } else if self.split.test_core.cells()[i] {
                    3
                } else {
                    0
                }
            })
            .collect();
        for p in self.scene.picks.within(&self.split.train_core).records() {
            if let Some((r, c)) = g.cell_of(p.x, p.y) {
                out[g.idx(r, c)] = 1;
            }
        }
        out
    }

    /// Variational solve on the training picks; returns the score as JSON.
    pub fn reconstruct(&mut self, epochs: usize, lambda_phys: f64, lambda_prior: f64) -> Result<String, JsError> {
        let s = self.solve(epochs, lambda_phys, lambda_prior).map_err(js_err)?;
        serde_json::to_string(&s).map_err(js_err)
    }

    /// `"idw"` or `"kriging"` on the training picks; returns the score as JSON.
    pub fn baseline(&mut self, kind: &str) -> Result<String, JsError> {
        let s = self.solve_baseline(kind).map_err(js_err)?;
        serde_json::to_string(&s).map_err(js_err)
    }
}
