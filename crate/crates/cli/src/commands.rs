use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use bedrecon::baselines::{run_idw, run_kriging};
use bedrecon::data::io::{read_picks, read_raster, write_picks, write_raster};
use bedrecon::data::{synth_scene, RadarPicks, Scene};
use bedrecon::eval::{block_split, evaluate};
use bedrecon::grid::{distance_transform, Mask, RasterGrid, VectorField};
use bedrecon::pipeline::run_reconstruction;
use serde_json::json;

use crate::config::{RunConfig, SCENE_FILES};
use crate::manifest::write_manifest;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Baseline {
    Idw,
    Kriging,
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn save_raster(dir: &Path, name: &str, grid: &RasterGrid, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    write_raster(dir.join(name), grid)?;
    files.push(name.into());
    Ok(())
}

fn save_json(dir: &Path, name: &str, value: &impl serde::Serialize, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
    files.push(name.into());
    Ok(())
}

/// Loads the scene rasters and the picks named by the config.
pub fn load_inputs(cfg: &RunConfig) -> Result<(Scene, RadarPicks), CliError> {
    let paths = cfg.scene_paths()?;
    let mut grids = Vec::with_capacity(paths.len());
    for (_, p) in &paths {
        grids.push(read_raster(p)?);
    }
    let [surface, vx, vy, smb, dhdt, prior]: [RasterGrid; 6] = grids.try_into().expect("six scene rasters");
    let scene = Scene::new(surface, VectorField::new(vx, vy)?, smb, dhdt, prior)?;
    let ingest = RadarPicks::ingest(read_picks(cfg.picks_path()?)?, scene.geometry());
    Ok((scene, ingest.picks))
}

pub fn synth(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.output_dir();
    prepare_dir(&dir)?;
    let s = synth_scene(cfg.seed, &cfg.synth)?;
    let sc = &s.scene;
    let mut files = Vec::new();
    let grids = [sc.surface(), &sc.velocity().x, &sc.velocity().y, sc.smb(), sc.dhdt(), sc.prior_bed()];
    for ((_, file), g) in SCENE_FILES.iter().zip(grids) {
        save_raster(&dir, file, g, &mut files)?;
    }
    save_raster(&dir, "true_bed.asc", &s.true_bed, &mut files)?;
    write_picks(dir.join("picks.csv"), s.picks.records())?;
    files.push("picks.csv".into());

    // A ready-to-use config for the other commands, with paths relative to
    // the output directory.
    let mut run = cfg.clone();
    run.paths.scene_dir = Some(".".into());
    run.paths.scene = Default::default();
    run.paths.picks = Some("picks.csv".into());
    run.paths.output_dir = Some("run".into());
    save_json(&dir, "run.json", &run, &mut files)?;

    write_manifest(&dir, "synth", cfg, &files, json!({ "picks": s.picks.len() }))?;
    log::info!("synthetic scene written to {}", dir.display());
    Ok(dir)
}

pub fn reconstruct(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    cfg.validate_numbers()?;
    let (scene, picks) = load_inputs(cfg)?;
    let dir = cfg.output_dir();
    prepare_dir(&dir)?;
    let opts = cfg.recon_options();
    log::info!("reconstructing {}x{} grid, mode {:?}, tta {}", scene.geometry().height, scene.geometry().width, opts.mode, opts.tta);
    let out = run_reconstruction(&scene, &picks, &opts)?;

    let mut files = Vec::new();
    save_raster(&dir, "bed.asc", &out.bed, &mut files)?;
    save_raster(&dir, "thickness.asc", &out.thickness, &mut files)?;
    save_raster(&dir, "residual.asc", &out.state.residual(), &mut files)?;
    save_raster(&dir, "r_hat.asc", &out.state.r_hat, &mut files)?;
    let mut extra = json!({
        "norm": out.state.norm,
        "picks_used": out.used_picks.len(),
        "train_core_cells": out.split.train_core.count(),
        "test_core_cells": out.split.test_core.count(),
    });
    if let Some(h) = &out.history {
        let path = dir.join("history.csv");
        let f = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        h.write_csv(BufWriter::new(f)).map_err(|e| CliError::io(&path, e))?;
        files.push("history.csv".into());
        extra["best_epoch"] = json!(h.best_epoch);
        extra["best_monitor"] = json!(h.best_monitor);
        extra["stopped_early"] = json!(h.stopped_early);
    }
    write_manifest(&dir, "reconstruct", cfg, &files, extra)?;
    Ok(dir)
}

pub fn baseline(cfg: &RunConfig, which: Baseline) -> Result<PathBuf, CliError> {
    cfg.validate_numbers()?;
    let (scene, picks) = load_inputs(cfg)?;
    let dir = cfg.output_dir();
    prepare_dir(&dir)?;
    // Baselines only ever see the training picks.
    let split = block_split(scene.geometry(), &cfg.split)?;
    let mut files = Vec::new();
    let extra = match which {
        Baseline::Idw => {
            let bed = run_idw(&picks, &scene, &split.train_core, &cfg.baseline)?;
            save_raster(&dir, "idw_bed.asc", &bed, &mut files)?;
            json!({ "picks_used": picks.within(&split.train_core).len() })
        }
        Baseline::Kriging => {
            let run = run_kriging(&picks, &scene, &split.train_core, &cfg.baseline)?;
            eprintln!(
                "variogram: nugget {:.6} sill {:.6} range {:.6}",
                run.fit.model.nugget, run.fit.model.sill, run.fit.model.range
            );
            save_raster(&dir, "kriging_bed.asc", &run.bed, &mut files)?;
            let v = json!({
                "nugget": run.fit.model.nugget,
                "sill": run.fit.model.sill,
                "range": run.fit.model.range,
                "loss": run.fit.loss,
                "degenerate": run.fit.degenerate,
                "bins": run.bins,
                "fallback_cells": run.fallback_cells,
            });
            save_json(&dir, "variogram.json", &v, &mut files)?;
            v
        }
    };
    let name = match which {
        Baseline::Idw => "baseline-idw",
        Baseline::Kriging => "baseline-kriging",
    };
    write_manifest(&dir, name, cfg, &files, extra)?;
    Ok(dir)
}

pub fn eval(cfg: &RunConfig, prediction: &Path, reference: &Path) -> Result<PathBuf, CliError> {
    let pred = read_raster(prediction)?;
    let reference_grid = read_raster(reference)?;
    pred.check_same_shape(&reference_grid)?;
    let geom = *reference_grid.geometry();
    let split = block_split(&geom, &cfg.split)?;
    let picks = match cfg.picks_path() {
        Ok(p) => RadarPicks::ingest(read_picks(p)?, &geom).picks,
        Err(_) => {
            log::warn!("no radar picks configured; radar rows and stratification use no picks");
            RadarPicks::default()
        }
    };
    let held_out = picks.within(&split.test_core);
    let d_rad = pick_distance(&picks, &reference_grid)?;
    let report = evaluate(&pred, &reference_grid, &split.test_core, &held_out, &d_rad)?;

    let dir = cfg.output_dir();
    prepare_dir(&dir)?;
    let mut files = Vec::new();
    let json_path = dir.join("report.json");
    std::fs::write(&json_path, report.to_json() + "\n").map_err(|e| CliError::io(&json_path, e))?;
    files.push("report.json".into());
    let txt_path = dir.join("report.txt");
    std::fs::write(&txt_path, report.to_table()).map_err(|e| CliError::io(&txt_path, e))?;
    files.push("report.txt".into());
    print!("{}", report.to_table());
    let extra = json!({ "prediction": prediction, "reference": reference });
    write_manifest(&dir, "eval", cfg, &files, extra)?;
    Ok(dir)
}

/// Distance in cells to the nearest pick cell; infinite everywhere when
/// there are no picks.
fn pick_distance(picks: &RadarPicks, like: &RasterGrid) -> Result<RasterGrid, CliError> {
    let geom = *like.geometry();
    let mut mask = Mask::filled(geom, false);
    for p in picks.records() {
        if let Some((r, c)) = geom.cell_of(p.x, p.y) {
            mask.set(r, c, true);
        }
    }
    if !mask.any() {
        return Ok(RasterGrid::filled(geom, f64::INFINITY));
    }
    Ok(distance_transform(&mask)?)
}
