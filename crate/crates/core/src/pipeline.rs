//! End-to-end reconstruction on a block split: observations from the
//! training picks, residual statistics on the train core, then a whole-grid
//! or tiled solve with optional dihedral averaging.

use serde::{Deserialize, Serialize};

use crate::data::{residual_norm_stats, ObsConfig, ObservationLayer, RadarPicks, Scene, SIGMA_FLOOR};
use crate::error::Result;
use crate::eval::{block_split, Split, SplitSpec};
use crate::grid::{Mask, RasterGrid};
use crate::solve::{reconstruct, solve_tiled, solve_variational, tta_with, History, Problem, ReconState, SolveSettings, TileConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMode {
    #[default]
    WholeGrid,
    Tiled,
}

/// Which picks the solver may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PickScope {
    /// Only picks inside the train core; test-core picks stay held out.
    #[default]
    TrainCore,
    /// Every pick on the grid.
    All,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconOptions {
    pub split: SplitSpec,
    pub observations: ObsConfig,
    pub picks: PickScope,
    pub settings: SolveSettings,
    pub tiles: TileConfig,
    pub mode: SolveMode,
    pub tta: bool,
}

#[derive(Debug, Clone)]
pub struct ReconOutput {
    pub split: Split,
    pub obs: ObservationLayer,
    pub state: ReconState,
    pub thickness: RasterGrid,
    pub bed: RasterGrid,
    /// Present for a single whole-grid solve.
    pub history: Option<History>,
    pub used_picks: RadarPicks,
}

/// Builds the solver input for `scene` and the picks in scope.
pub fn build_problem(scene: &Scene, picks: &RadarPicks, opts: &ReconOptions) -> Result<(Split, Problem, RadarPicks)> {
    let split = block_split(scene.geometry(), &opts.split)?;
    let used = match opts.picks {
        PickScope::TrainCore => picks.within(&split.train_core),
        PickScope::All => picks.clone(),
    };
    let obs = ObservationLayer::build(&used, scene, &opts.observations)?;
    let norm = residual_norm_stats(&obs, scene, &split.train_core, SIGMA_FLOOR)?;
    let problem = Problem {
        scene: scene.clone(),
        obs,
        norm,
        region: Mask::filled(*scene.geometry(), true),
        monitor: split.train_core.clone(),
    };
    Ok((split, problem, used))
}

fn solve_once(problem: &Problem, opts: &ReconOptions) -> Result<(ReconState, Option<History>)> {
    match opts.mode {
        SolveMode::WholeGrid => {
            let (s, h) = solve_variational(problem, &opts.settings)?;
            Ok((s, Some(h)))
        }
        SolveMode::Tiled => Ok((solve_tiled(problem, &opts.settings, &opts.tiles)?, None)),
    }
}

pub fn run_reconstruction(scene: &Scene, picks: &RadarPicks, opts: &ReconOptions) -> Result<ReconOutput> {
    opts.settings.loss.validate()?;
    opts.settings.solver.validate()?;
    opts.tiles.validate()?;
    let (split, problem, used_picks) = build_problem(scene, picks, opts)?;
    let (state, history) = if opts.tta {
        let r_hat = tta_with(&problem, |p| Ok(solve_once(p, opts)?.0.r_hat))?;
        (ReconState { r_hat, norm: problem.norm }, None)
    } else {
        solve_once(&problem, opts)?
    };
    let (thickness, bed) = reconstruct(&state, scene)?;
    Ok(ReconOutput { split, obs: problem.obs, state, thickness, bed, history, used_picks })
}
