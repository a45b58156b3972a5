use bedrecon::baselines::{run_idw, BaselineConfig};
use bedrecon::data::{synth_scene, NormStats, ObsConfig, ObservationLayer, Pick, PickPattern, RadarPicks, Scene, SynthParams};
use bedrecon::eval::pixel_metrics;
use bedrecon::grid::{Geometry, Mask, RasterGrid, VectorField};
use bedrecon::physics::{LossConfig, Schedule};
use bedrecon::pipeline::{build_problem, run_reconstruction, PickScope, ReconOptions};
use bedrecon::solve::{reconstruct, solve_variational, tta_solve, Problem, SolveSettings};

/// Default loss with every term switched off.
fn silent() -> LossConfig {
    LossConfig {
        lambda_data: 0.0,
        lambda_phys: 0.0,
        lambda_tv: 0.0,
        lambda_lap: 0.0,
        lambda_nonneg: 0.0,
        lambda_prior: 0.0,
        ..Default::default()
    }
}

fn no_picks_problem(scene: &Scene, norm: NormStats) -> Problem {
    let g = *scene.geometry();
    let obs = ObservationLayer {
        mask: Mask::filled(g, false),
        h_rad: RasterGrid::zeros(g),
        d_rad: RasterGrid::filled(g, 1e6),
        confidence: RasterGrid::zeros(g),
    };
    Problem { scene: scene.clone(), obs, norm, region: Mask::filled(g, true), monitor: Mask::filled(g, false) }
}

fn small_scene(n: usize, seed: u64) -> bedrecon::data::SynthScene {
    synth_scene(seed, &SynthParams { height: n, width: n, ..Default::default() }).unwrap()
}

#[test]
fn prior_only_converges_to_the_prior_bed() {
    let s = small_scene(32, 3);
    let problem = no_picks_problem(&s.scene, NormStats { mu_t: 25.0, sigma_t: 10.0 });
    let mut settings = SolveSettings {
        loss: LossConfig { lambda_prior: 1.0, ..silent() },
        schedule: Schedule { prior_ramp_start: 0.0, prior_ramp_end: 0.01, ..Default::default() },
        ..Default::default()
    };
    settings.solver.epochs = 7500;
    settings.solver.weight_decay = 0.0;
    let (state, _) = solve_variational(&problem, &settings).unwrap();
    let (_, bed) = reconstruct(&state, &s.scene).unwrap();
    let worst = bed.zip_map(s.scene.prior_bed(), |a, b| (a - b).abs()).unwrap().max_abs();
    assert!(worst < 0.1, "max |b - b_p| = {worst}");
}

#[test]
fn monitor_never_ends_above_its_start_and_history_is_finite() {
    let s = small_scene(48, 4);
    let mut opts = ReconOptions::default();
    opts.split.buffer = 6;
    opts.settings.solver.epochs = 400;
    let (_, problem, _) = build_problem(&s.scene, &s.picks, &opts).unwrap();
    let (_, h) = solve_variational(&problem, &opts.settings).unwrap();
    assert!(h.rows.iter().all(|r| r.total.is_finite()));
    let (start, best) = (h.initial_monitor.unwrap(), h.best_monitor.unwrap());
    assert!(best <= start, "{best} > {start}");
    let observed = h.rows.iter().filter_map(|r| r.monitor).fold(f64::INFINITY, f64::min);
    assert!(best <= observed);
}

#[test]
fn identical_settings_give_identical_states() {
    let s = small_scene(40, 8);
    let mut opts = ReconOptions::default();
    opts.split.buffer = 6;
    opts.settings.solver.epochs = 150;
    let a = run_reconstruction(&s.scene, &s.picks, &opts).unwrap();
    let b = run_reconstruction(&s.scene, &s.picks, &opts).unwrap();
    let same = a.state.r_hat.values().iter().zip(b.state.r_hat.values()).all(|(x, y)| x.to_bits() == y.to_bits());
    assert!(same);
}

#[test]
fn dominant_nonnegativity_keeps_thickness_above_zero() {
    let s = small_scene(32, 5);
    let problem = no_picks_problem(&s.scene, NormStats { mu_t: -300.0, sigma_t: 20.0 });
    let mut settings = SolveSettings {
        loss: LossConfig { lambda_nonneg: 1.0, ..silent() },
        ..Default::default()
    };
    settings.solver.epochs = 7500;
    let (state, _) = solve_variational(&problem, &settings).unwrap();
    let (h, _) = reconstruct(&state, &s.scene).unwrap();
    let lowest = h.values().iter().copied().fold(f64::INFINITY, f64::min);
    assert!(lowest >= -0.5, "min thickness {lowest}");
}

/// Radially symmetric ice cap with a pick lattice that every rotation and
/// reflection maps onto itself. `n` is a multiple of 4 so coarse scales pool
/// whole blocks.
fn symmetric_problem(n: usize) -> Problem {
    let g = Geometry::new(n, n, 200.0, (0.0, 0.0)).unwrap();
    let c = (n - 1) as f64 / 2.0;
    let rho2 = |r: usize, col: usize| {
        let (dx, dy) = (col as f64 - c, c - r as f64);
        dx * dx + dy * dy
    };
    let surface = RasterGrid::from_index_fn(g, |r, col| 1200.0 - 0.5 * rho2(r, col));
    let prior = RasterGrid::from_index_fn(g, |r, col| 100.0 + 40.0 * (rho2(r, col) / 40.0).cos());
    let vx = RasterGrid::from_index_fn(g, |_, col| 3.0 * (col as f64 - c));
    let vy = RasterGrid::from_index_fn(g, |r, _| 3.0 * (c - r as f64));
    let smb = RasterGrid::filled(g, 0.4);
    let dhdt = RasterGrid::zeros(g);
    let scene = Scene::new(surface, VectorField::new(vx, vy).unwrap(), smb, dhdt, prior.clone()).unwrap();

    let mut picks = Vec::new();
    let on = |i: usize| matches!(i % 4, 1 | 2);
    for r in (0..n).filter(|&i| on(i)) {
        for col in (0..n).filter(|&i| on(i)) {
            let (x, y) = g.cell_center(r, col);
            picks.push(Pick { x, y, bed: prior.get(r, col) - 30.0 * (-rho2(r, col) / 60.0).exp() });
        }
    }
    let picks = RadarPicks::ingest(picks, &g).picks;
    let obs = ObservationLayer::build(&picks, &scene, &ObsConfig::default()).unwrap();
    let monitor = obs.mask.clone();
    Problem { scene, obs, norm: NormStats { mu_t: 10.0, sigma_t: 15.0 }, region: Mask::filled(g, true), monitor }
}

#[test]
fn symmetric_scene_averages_to_the_single_solve() {
    let problem = symmetric_problem(32);
    let mut settings = SolveSettings::default();
    settings.solver.epochs = 300;
    let (single, _) = solve_variational(&problem, &settings).unwrap();
    let avg = tta_solve(&problem, &settings).unwrap();
    let scale = single.r_hat.max_abs();
    assert!(scale > 0.1);
    let diff = avg.r_hat.zip_map(&single.r_hat, |a, b| a - b).unwrap().max_abs();
    assert!(diff < 1e-6 * scale, "max difference {diff} against scale {scale}");
}

#[test]
fn dense_picks_beat_idw() {
    let p = SynthParams { height: 64, width: 64, picks: PickPattern::Lattice { step: 4 }, ..Default::default() };
    let s = synth_scene(21, &p).unwrap();
    let mut opts = ReconOptions { picks: PickScope::All, ..Default::default() };
    opts.split.buffer = 8;
    let out = run_reconstruction(&s.scene, &s.picks, &opts).unwrap();
    let g = *s.scene.geometry();
    let all = Mask::filled(g, true);
    let idw = run_idw(&s.picks, &s.scene, &all, &BaselineConfig::default()).unwrap();
    let ours = pixel_metrics(&out.bed, &s.true_bed, &out.split.train_core).unwrap().rmse;
    let theirs = pixel_metrics(&idw, &s.true_bed, &out.split.train_core).unwrap().rmse;
    assert!(ours < theirs, "solver {ours} vs IDW {theirs}");
}
